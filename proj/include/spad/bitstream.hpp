#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spad/image.hpp"
#include "spad/photon_model.hpp"

namespace spad {

/// Bytes per packed row: ceil(width / 8).
constexpr std::size_t row_bytes(std::size_t width) { return (width + 7) / 8; }

/// One 1-bit-per-pixel frame. Rows are padded to whole bytes, MSB first;
/// padding bits are always zero.
struct BinaryFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;
};

/// Packs a row-major 0/1 matrix. Throws std::invalid_argument on a size
/// mismatch or a value outside {0, 1}.
BinaryFrame pack_frame(std::span<const std::uint8_t> pixels, std::size_t width,
                       std::size_t height);
std::vector<std::uint8_t> unpack_frame(const BinaryFrame& frame);

/// Fixed-size little-endian header of the .sbs format.
struct StreamHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frame_count = 0;
  double tau_bin = 0.0;
  double eta = 0.0;
  double dark_rate = 0.0;
  std::uint64_t rng_seed = 0;

  static constexpr char kMagic[4] = {'S', 'B', 'S', '1'};
  static constexpr std::size_t kEncodedSize = 48;

  std::size_t frame_bytes() const { return height * row_bytes(width); }
  std::uint64_t payload_bytes() const {
    return static_cast<std::uint64_t>(frame_count) * frame_bytes();
  }
  SensorConfig sensor() const { return {eta, dark_rate, tau_bin, width, height}; }
  /// Throws StreamError(invalid_header) on a violated invariant.
  void validate() const;
};

/// In-memory binary frame stream: header plus frame_count packed frames.
struct BitplaneStream {
  StreamHeader header;
  std::vector<std::uint8_t> payload;

  std::span<const std::uint8_t> frame(std::size_t index) const;
  std::span<std::uint8_t> frame(std::size_t index);
};

class StreamError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, invalid_header, truncated_payload, size_mismatch };
  StreamError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> encode_header(const StreamHeader& header);
StreamHeader decode_header(std::span<const std::uint8_t> bytes);

void write_stream(const BitplaneStream& stream, const std::filesystem::path& path);
BitplaneStream read_stream(const std::filesystem::path& path);

/// Frame-at-a-time reader; validates the header and payload size on open.
class StreamReader {
 public:
  explicit StreamReader(const std::filesystem::path& path);

  const StreamHeader& header() const { return header_; }
  std::uint32_t position() const { return next_; }
  void seek(std::uint32_t frame);
  /// Reads the next frame into out (size frame_bytes()); false at end of stream.
  bool next(std::span<std::uint8_t> out);

 private:
  std::ifstream in_;
  StreamHeader header_;
  std::uint32_t next_ = 0;
};

/// Appends frames to a new .sbs file; the frame count is fixed up front.
class StreamWriter {
 public:
  StreamWriter(const std::filesystem::path& path, const StreamHeader& header);
  void write(std::span<const std::uint8_t> frame);
  /// Throws StreamError(size_mismatch) if fewer frames were written than declared.
  void close();

 private:
  std::ofstream out_;
  StreamHeader header_;
  std::uint32_t written_ = 0;
};

/// Per-pixel detection counts over n_frames binary frames.
struct CountImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint64_t n_frames = 0;
  std::vector<std::uint32_t> counts;

  CountImage() = default;
  CountImage(std::size_t w, std::size_t h) : width(w), height(h), counts(w * h, 0) {}
};

/// Pixel-wise sum of two count images over disjoint frame ranges.
CountImage merge_counts(const CountImage& a, const CountImage& b);

/// Streaming accumulator; single writer. Internally keeps eight 8-bit lanes
/// per packed byte and flushes them to 32-bit counts every 255 frames.
class Accumulator {
 public:
  Accumulator(std::size_t width, std::size_t height);
  void add(std::span<const std::uint8_t> frame);
  CountImage result();
  std::uint64_t frames() const { return frames_; }

 private:
  void flush();

  std::size_t width_, height_;
  std::vector<std::uint64_t> lanes_;
  std::vector<std::uint32_t> counts_;
  std::uint64_t frames_ = 0;
  unsigned pending_ = 0;
};

/// Counts over frames [first, first + count). Parallelizes over row bands;
/// output is bit-identical for any thread count. Throws std::out_of_range.
CountImage accumulate(const BitplaneStream& stream, std::size_t first, std::size_t count,
                      unsigned threads = 0);
CountImage accumulate(StreamReader& reader, std::size_t first, std::size_t count);

/// Maps counts to an n-bit image: min(round(count * 2^d / N), 2^d - 1).
IntensityImage to_intensity(const CountImage& ci, int bit_depth);

/// Total exposure of 2^d binary frames, 2^d * tau_bin.
double equivalent_exposure(int bit_depth, double tau_bin);
/// Binary frame exposure giving the requested total over 2^d frames.
double binary_exposure_for(int bit_depth, double total_exposure);

}  // namespace spad
