#include "spad/bitstream.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <type_traits>

#include "spad/parallel.hpp"

namespace spad {

BinaryFrame pack_frame(std::span<const std::uint8_t> pixels, std::size_t width,
                       std::size_t height) {
  if (pixels.size() != width * height)
    throw std::invalid_argument("pack_frame: pixel count does not match dimensions");
  BinaryFrame f{width, height, std::vector<std::uint8_t>(height * row_bytes(width), 0)};
  const std::size_t rb = row_bytes(width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::uint8_t v = pixels[y * width + x];
      if (v > 1) throw std::invalid_argument("pack_frame: pixel values must be 0 or 1");
      if (v) f.bits[y * rb + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    }
  }
  return f;
}

std::vector<std::uint8_t> unpack_frame(const BinaryFrame& frame) {
  const std::size_t rb = row_bytes(frame.width);
  if (frame.bits.size() != frame.height * rb)
    throw std::invalid_argument("unpack_frame: storage size does not match dimensions");
  std::vector<std::uint8_t> out(frame.width * frame.height);
  for (std::size_t y = 0; y < frame.height; ++y)
    for (std::size_t x = 0; x < frame.width; ++x)
      out[y * frame.width + x] = (frame.bits[y * rb + x / 8] >> (7 - x % 8)) & 1u;
  return out;
}

// ---------------------------------------------------------------------------
// Header encoding

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& offset) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  offset += sizeof(T);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void StreamHeader::validate() const {
  auto fail = [](const std::string& msg) {
    throw StreamError(StreamError::Kind::invalid_header, "invalid header: " + msg);
  };
  if (width == 0 || height == 0) fail("width and height must be >= 1");
  if (frame_count == 0) fail("frame_count must be >= 1");
  if (!(tau_bin > 0.0) || !std::isfinite(tau_bin)) fail("tau_bin must be finite and > 0");
  if (!(eta > 0.0 && eta <= 1.0)) fail("eta must be in (0, 1]");
  if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate)) fail("dark_rate must be finite and >= 0");
}

std::vector<std::uint8_t> encode_header(const StreamHeader& h) {
  std::vector<std::uint8_t> out(std::begin(StreamHeader::kMagic), std::end(StreamHeader::kMagic));
  out.reserve(StreamHeader::kEncodedSize);
  put_le(out, h.width);
  put_le(out, h.height);
  put_le(out, h.frame_count);
  put_le(out, h.tau_bin);
  put_le(out, h.eta);
  put_le(out, h.dark_rate);
  put_le(out, h.rng_seed);
  return out;
}

StreamHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), StreamHeader::kMagic, 4) != 0)
    throw StreamError(StreamError::Kind::bad_magic, "bad magic: not an SBS1 stream");
  if (bytes.size() < StreamHeader::kEncodedSize)
    throw StreamError(StreamError::Kind::invalid_header, "invalid header: truncated header");
  std::size_t off = 4;
  StreamHeader h;
  h.width = get_le<std::uint32_t>(bytes, off);
  h.height = get_le<std::uint32_t>(bytes, off);
  h.frame_count = get_le<std::uint32_t>(bytes, off);
  h.tau_bin = get_le<double>(bytes, off);
  h.eta = get_le<double>(bytes, off);
  h.dark_rate = get_le<double>(bytes, off);
  h.rng_seed = get_le<std::uint64_t>(bytes, off);
  h.validate();
  return h;
}

std::span<const std::uint8_t> BitplaneStream::frame(std::size_t index) const {
  const std::size_t fb = header.frame_bytes();
  return std::span<const std::uint8_t>(payload).subspan(index * fb, fb);
}

std::span<std::uint8_t> BitplaneStream::frame(std::size_t index) {
  const std::size_t fb = header.frame_bytes();
  return std::span<std::uint8_t>(payload).subspan(index * fb, fb);
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

StreamHeader read_and_check_header(std::ifstream& in, const std::filesystem::path& path) {
  std::array<std::uint8_t, StreamHeader::kEncodedSize> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  StreamHeader h = decode_header(std::span<const std::uint8_t>(buf.data(), got));

  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw StreamError(StreamError::Kind::io, "cannot stat " + path.string());
  const std::uint64_t expected = StreamHeader::kEncodedSize + h.payload_bytes();
  if (file_size < expected)
    throw StreamError(StreamError::Kind::truncated_payload,
                      "truncated payload: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(file_size));
  if (file_size > expected)
    throw StreamError(StreamError::Kind::size_mismatch,
                      "size mismatch: " + std::to_string(file_size - expected) +
                          " trailing bytes after payload");
  return h;
}

}  // namespace

void write_stream(const BitplaneStream& stream, const std::filesystem::path& path) {
  stream.header.validate();
  if (stream.payload.size() != stream.header.payload_bytes())
    throw StreamError(StreamError::Kind::size_mismatch, "payload size does not match header");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StreamError(StreamError::Kind::io, "cannot open " + path.string() + " for writing");
  const auto hdr = encode_header(stream.header);
  out.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));
  out.write(reinterpret_cast<const char*>(stream.payload.data()),
            static_cast<std::streamsize>(stream.payload.size()));
  if (!out) throw StreamError(StreamError::Kind::io, "write failed: " + path.string());
}

BitplaneStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StreamError(StreamError::Kind::io, "cannot open " + path.string());
  BitplaneStream s;
  s.header = read_and_check_header(in, path);
  s.payload.resize(s.header.payload_bytes());
  in.read(reinterpret_cast<char*>(s.payload.data()), static_cast<std::streamsize>(s.payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != s.payload.size())
    throw StreamError(StreamError::Kind::truncated_payload, "truncated payload");
  return s;
}

StreamReader::StreamReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw StreamError(StreamError::Kind::io, "cannot open " + path.string());
  header_ = read_and_check_header(in_, path);
}

void StreamReader::seek(std::uint32_t frame) {
  if (frame > header_.frame_count) throw std::out_of_range("seek past end of stream");
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(StreamHeader::kEncodedSize +
                                        static_cast<std::uint64_t>(frame) * header_.frame_bytes()));
  next_ = frame;
}

bool StreamReader::next(std::span<std::uint8_t> out) {
  if (next_ >= header_.frame_count) return false;
  if (out.size() != header_.frame_bytes()) throw std::invalid_argument("frame buffer size mismatch");
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size())
    throw StreamError(StreamError::Kind::truncated_payload, "truncated payload");
  ++next_;
  return true;
}

StreamWriter::StreamWriter(const std::filesystem::path& path, const StreamHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
  header_.validate();
  if (!out_) throw StreamError(StreamError::Kind::io, "cannot open " + path.string() + " for writing");
  const auto hdr = encode_header(header_);
  out_.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));
}

void StreamWriter::write(std::span<const std::uint8_t> frame) {
  if (frame.size() != header_.frame_bytes()) throw std::invalid_argument("frame size mismatch");
  if (written_ >= header_.frame_count)
    throw StreamError(StreamError::Kind::size_mismatch, "more frames than declared");
  out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  ++written_;
}

void StreamWriter::close() {
  if (written_ != header_.frame_count)
    throw StreamError(StreamError::Kind::size_mismatch, "fewer frames written than declared");
  out_.close();
  if (!out_) throw StreamError(StreamError::Kind::io, "write failed");
}

// ---------------------------------------------------------------------------
// Accumulation

namespace {

// kSpread[b] holds the 8 bits of b, MSB first, one per byte of the result.
constexpr std::array<std::uint64_t, 256> make_spread_table() {
  std::array<std::uint64_t, 256> t{};
  for (unsigned b = 0; b < 256; ++b) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < 8; ++i)
      if (b & (0x80u >> i)) v |= std::uint64_t{1} << (8 * i);
    t[b] = v;
  }
  return t;
}
constexpr auto kSpread = make_spread_table();

constexpr unsigned kLaneCapacity = 255;

inline void add_bytes(const std::uint8_t* src, std::uint64_t* lanes, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) lanes[i] += kSpread[src[i]];
}

// Drains lanes for rows [y0, y1) into counts and zeroes them.
void flush_lanes(std::uint64_t* lanes, std::uint32_t* counts, std::size_t width, std::size_t y0,
                 std::size_t y1) {
  const std::size_t rb = row_bytes(width);
  for (std::size_t y = y0; y < y1; ++y) {
    std::uint64_t* row = lanes + (y - y0) * rb;
    std::uint32_t* crow = counts + y * width;
    for (std::size_t bx = 0; bx < rb; ++bx) {
      const std::uint64_t v = row[bx];
      if (v == 0) continue;
      const std::size_t x0 = bx * 8;
      const std::size_t n = std::min<std::size_t>(8, width - x0);
      for (std::size_t i = 0; i < n; ++i) crow[x0 + i] += static_cast<std::uint32_t>((v >> (8 * i)) & 0xFFu);
      row[bx] = 0;
    }
  }
}

}  // namespace

CountImage merge_counts(const CountImage& a, const CountImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("merge_counts: dimension mismatch");
  CountImage out(a.width, a.height);
  out.n_frames = a.n_frames + b.n_frames;
  for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] = a.counts[i] + b.counts[i];
  return out;
}

Accumulator::Accumulator(std::size_t width, std::size_t height)
    : width_(width), height_(height), lanes_(height * row_bytes(width), 0), counts_(width * height, 0) {}

void Accumulator::add(std::span<const std::uint8_t> frame) {
  if (frame.size() != lanes_.size()) throw std::invalid_argument("Accumulator: frame size mismatch");
  add_bytes(frame.data(), lanes_.data(), frame.size());
  ++frames_;
  if (++pending_ == kLaneCapacity) flush();
}

void Accumulator::flush() {
  flush_lanes(lanes_.data(), counts_.data(), width_, 0, height_);
  pending_ = 0;
}

CountImage Accumulator::result() {
  flush();
  CountImage ci(width_, height_);
  ci.counts = counts_;
  ci.n_frames = frames_;
  return ci;
}

CountImage accumulate(const BitplaneStream& stream, std::size_t first, std::size_t count,
                      unsigned threads) {
  const auto& h = stream.header;
  if (first > h.frame_count || count > h.frame_count - first)
    throw std::out_of_range("accumulate: frame range exceeds stream length");
  const std::size_t width = h.width, height = h.height, rb = row_bytes(width);
  const std::size_t fb = h.frame_bytes();
  if (stream.payload.size() != h.payload_bytes())
    throw std::invalid_argument("accumulate: payload size does not match header");

  CountImage ci(width, height);
  ci.n_frames = count;
  parallel_for_chunks(height, threads, [&](std::size_t y0, std::size_t y1) {
    std::vector<std::uint64_t> lanes((y1 - y0) * rb, 0);
    const std::size_t band = (y1 - y0) * rb;
    unsigned pending = 0;
    for (std::size_t f = first; f < first + count; ++f) {
      add_bytes(stream.payload.data() + f * fb + y0 * rb, lanes.data(), band);
      if (++pending == kLaneCapacity) {
        flush_lanes(lanes.data(), ci.counts.data(), width, y0, y1);
        pending = 0;
      }
    }
    flush_lanes(lanes.data(), ci.counts.data(), width, y0, y1);
  });
  return ci;
}

CountImage accumulate(StreamReader& reader, std::size_t first, std::size_t count) {
  const auto& h = reader.header();
  if (first > h.frame_count || count > h.frame_count - first)
    throw std::out_of_range("accumulate: frame range exceeds stream length");
  reader.seek(static_cast<std::uint32_t>(first));
  Accumulator acc(h.width, h.height);
  std::vector<std::uint8_t> buf(h.frame_bytes());
  for (std::size_t i = 0; i < count; ++i) {
    reader.next(buf);
    acc.add(buf);
  }
  return acc.result();
}

IntensityImage to_intensity(const CountImage& ci, int bit_depth) {
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit depth must be in [1, 16]");
  if (ci.n_frames == 0) throw std::invalid_argument("to_intensity: count image has no frames");
  IntensityImage img(ci.width, ci.height, bit_depth);
  const std::uint64_t levels = std::uint64_t{1} << bit_depth;
  const std::uint64_t top = levels - 1;
  const std::uint64_t n = ci.n_frames;
  for (std::size_t i = 0; i < ci.counts.size(); ++i) {
    // round(count * 2^d / N), halves rounded up, in exact integer arithmetic.
    const std::uint64_t scaled = (2 * ci.counts[i] * levels + n) / (2 * n);
    img.samples[i] = static_cast<std::uint16_t>(std::min(scaled, top));
  }
  return img;
}

double equivalent_exposure(int bit_depth, double tau_bin) {
  if (bit_depth < 1 || bit_depth > 62) throw std::invalid_argument("bit depth must be >= 1");
  return std::ldexp(tau_bin, bit_depth);
}

double binary_exposure_for(int bit_depth, double total_exposure) {
  if (bit_depth < 1 || bit_depth > 62) throw std::invalid_argument("bit depth must be >= 1");
  return std::ldexp(total_exposure, -bit_depth);
}

}  // namespace spad
