#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>

#include "spad/bitstream.hpp"

namespace spad {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spad_bitstream_test";
  fs::create_directories(dir);
  return dir / name;
}

// Builds a stream of random frames through pack_frame (so padding stays zero).
BitplaneStream random_stream(std::uint32_t w, std::uint32_t h, std::uint32_t frames, double p,
                             std::uint64_t seed) {
  BitplaneStream s;
  s.header = {w, h, frames, 1e-5, 0.5, 10.0, seed};
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(p);
  std::vector<std::uint8_t> pixels(w * h);
  for (std::uint32_t f = 0; f < frames; ++f) {
    for (auto& v : pixels) v = bit(rng);
    const BinaryFrame bf = pack_frame(pixels, w, h);
    s.payload.insert(s.payload.end(), bf.bits.begin(), bf.bits.end());
  }
  return s;
}

// Naive per-pixel count straight from unpacked frames.
std::vector<std::uint32_t> naive_counts(const BitplaneStream& s, std::size_t first, std::size_t count) {
  std::vector<std::uint32_t> c(s.header.width * s.header.height, 0);
  for (std::size_t f = first; f < first + count; ++f) {
    const auto span = s.frame(f);
    BinaryFrame bf{s.header.width, s.header.height, {span.begin(), span.end()}};
    const auto px = unpack_frame(bf);
    for (std::size_t i = 0; i < px.size(); ++i) c[i] += px[i];
  }
  return c;
}

TEST(PackFrame, Examples) {
  const std::vector<std::uint8_t> zeros(8, 0);
  EXPECT_EQ(pack_frame(zeros, 8, 1).bits, std::vector<std::uint8_t>{0x00});

  const std::vector<std::uint8_t> ones(10, 1);
  EXPECT_EQ(pack_frame(ones, 10, 1).bits, (std::vector<std::uint8_t>{0xFF, 0xC0}));

  const std::vector<std::uint8_t> first_only = {1, 0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(pack_frame(first_only, 9, 1).bits, (std::vector<std::uint8_t>{0x80, 0x00}));
}

TEST(PackFrame, RoundTripAndZeroPadding) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> px(33 * 17);
    for (auto& v : px) v = rng() & 1u;
    const BinaryFrame f = pack_frame(px, 33, 17);
    ASSERT_EQ(f.bits.size(), 17u * row_bytes(33));
    EXPECT_EQ(unpack_frame(f), px);
    for (std::size_t y = 0; y < 17; ++y) EXPECT_EQ(f.bits[y * 5 + 4] & 0x7Fu, 0u);
  }
}

TEST(PackFrame, Errors) {
  std::vector<std::uint8_t> px(10, 0);
  EXPECT_THROW(pack_frame(px, 3, 3), std::invalid_argument);
  px[4] = 2;
  EXPECT_THROW(pack_frame(px, 10, 1), std::invalid_argument);
  BinaryFrame bad{10, 2, std::vector<std::uint8_t>(3)};
  EXPECT_THROW(unpack_frame(bad), std::invalid_argument);
}

TEST(Accumulate, AllOnesFrames) {
  BitplaneStream s;
  s.header = {13, 5, 256, 1e-5, 0.5, 0.0, 0};
  std::vector<std::uint8_t> ones(13 * 5, 1);
  const BinaryFrame f = pack_frame(ones, 13, 5);
  for (int i = 0; i < 256; ++i) s.payload.insert(s.payload.end(), f.bits.begin(), f.bits.end());
  const CountImage ci = accumulate(s, 0, 256);
  EXPECT_EQ(ci.n_frames, 256u);
  for (auto c : ci.counts) EXPECT_EQ(c, 256u);
}

TEST(Accumulate, SingleFrameEqualsItsBits) {
  const BitplaneStream s = random_stream(21, 9, 3, 0.4, 1);
  const CountImage ci = accumulate(s, 1, 1);
  const auto span = s.frame(1);
  EXPECT_EQ(std::vector<std::uint32_t>(ci.counts.begin(), ci.counts.end()),
            naive_counts(s, 1, 1));
  BinaryFrame bf{21, 9, {span.begin(), span.end()}};
  const auto px = unpack_frame(bf);
  for (std::size_t i = 0; i < px.size(); ++i) EXPECT_EQ(ci.counts[i], px[i]);
}

TEST(Accumulate, MatchesNaiveCountAcrossLaneFlushes) {
  const BitplaneStream s = random_stream(37, 11, 700, 0.6, 2);
  EXPECT_EQ(accumulate(s, 0, 700).counts, naive_counts(s, 0, 700));
  EXPECT_EQ(accumulate(s, 123, 511).counts, naive_counts(s, 123, 511));
}

TEST(Accumulate, TotalEqualsPerFramePopcount) {
  const BitplaneStream s = random_stream(64, 64, 100, 0.3, 3);
  std::uint64_t popcount_total = 0;
  for (std::size_t f = 0; f < 100; ++f)
    for (auto byte : s.frame(f)) popcount_total += static_cast<std::uint64_t>(std::popcount(byte));
  const CountImage ci = accumulate(s, 0, 100);
  std::uint64_t sum = 0;
  for (auto c : ci.counts) sum += c;
  EXPECT_EQ(sum, popcount_total);
}

TEST(Accumulate, ChunkIndependentForEverySplit) {
  const BitplaneStream s = random_stream(19, 7, 60, 0.5, 4);
  const CountImage whole = accumulate(s, 0, 60);
  for (std::size_t k = 0; k <= 60; ++k) {
    const CountImage merged = merge_counts(accumulate(s, 0, k), accumulate(s, k, 60 - k));
    EXPECT_EQ(merged.counts, whole.counts) << "split at " << k;
    EXPECT_EQ(merged.n_frames, 60u);
  }
}

TEST(Accumulate, ThreadCountDoesNotChangeResult) {
  const BitplaneStream s = random_stream(50, 31, 300, 0.45, 5);
  const CountImage serial = accumulate(s, 0, 300, 1);
  for (unsigned t : {2u, 3u, 7u, 16u, 64u}) EXPECT_EQ(accumulate(s, 0, 300, t).counts, serial.counts);
}

TEST(Accumulate, RangeErrors) {
  const BitplaneStream s = random_stream(8, 8, 10, 0.5, 6);
  EXPECT_THROW(accumulate(s, 5, 6), std::out_of_range);
  EXPECT_THROW(accumulate(s, 11, 0), std::out_of_range);
  EXPECT_NO_THROW(accumulate(s, 10, 0));
}

TEST(Accumulate, StreamingReaderMatchesInMemory) {
  const BitplaneStream s = random_stream(30, 20, 400, 0.5, 7);
  const auto path = temp_path("streaming.sbs");
  write_stream(s, path);
  StreamReader reader(path);
  EXPECT_EQ(accumulate(reader, 17, 350).counts, accumulate(s, 17, 350).counts);

  Accumulator acc(30, 20);
  StreamReader r2(path);
  std::vector<std::uint8_t> buf(r2.header().frame_bytes());
  while (r2.next(buf)) acc.add(buf);
  const CountImage ci = acc.result();
  EXPECT_EQ(ci.n_frames, 400u);
  EXPECT_EQ(ci.counts, accumulate(s, 0, 400).counts);
}

TEST(ToIntensity, Examples) {
  CountImage ci(3, 1);
  ci.n_frames = 256;
  ci.counts = {0, 256, 100};
  const IntensityImage img8 = to_intensity(ci, 8);
  EXPECT_EQ(img8.samples[0], 0);
  EXPECT_EQ(img8.samples[1], 255);
  EXPECT_EQ(img8.samples[2], 100);

  CountImage c4(1, 1);
  c4.n_frames = 16;
  c4.counts = {8};
  EXPECT_EQ(to_intensity(c4, 4).samples[0], 8);

  EXPECT_THROW(to_intensity(ci, 0), std::invalid_argument);
  EXPECT_THROW(to_intensity(ci, 17), std::invalid_argument);
}

TEST(ToIntensity, MonotoneAndSurjectiveAtMatchedDepth) {
  for (int d : {1, 4, 8, 10}) {
    const std::uint32_t n = 1u << d;
    CountImage ci(n + 1, 1);
    ci.n_frames = n;
    for (std::uint32_t c = 0; c <= n; ++c) ci.counts[c] = c;
    const IntensityImage img = to_intensity(ci, d);
    std::vector<bool> hit(n, false);
    for (std::uint32_t c = 0; c <= n; ++c) {
      EXPECT_EQ(img.samples[c], std::min(c, n - 1));
      if (c > 0) EXPECT_GE(img.samples[c], img.samples[c - 1]);
      hit[img.samples[c]] = true;
    }
    for (bool h : hit) EXPECT_TRUE(h);
  }
  // Unmatched window: still monotone, clamped to the top code.
  CountImage ci(1001, 1);
  ci.n_frames = 1000;
  for (std::uint32_t c = 0; c <= 1000; ++c) ci.counts[c] = c;
  const IntensityImage img = to_intensity(ci, 8);
  for (std::size_t c = 1; c <= 1000; ++c) EXPECT_GE(img.samples[c], img.samples[c - 1]);
  EXPECT_EQ(img.samples[1000], 255);
}

TEST(EquivalentExposure, Examples) {
  EXPECT_EQ(equivalent_exposure(8, 5e-6), 1.28e-3);
  EXPECT_EQ(equivalent_exposure(4, 5e-6), 80e-6);
  EXPECT_EQ(equivalent_exposure(1, 3e-6), 6e-6);
  EXPECT_EQ(binary_exposure_for(8, 1.28e-3), 5e-6);
  EXPECT_EQ(binary_exposure_for(4, 80e-6), 5e-6);
  EXPECT_THROW(equivalent_exposure(0, 1e-6), std::invalid_argument);
}

TEST(StreamIo, RoundTripIsBitIdentical) {
  const BitplaneStream s = random_stream(64, 64, 100, 0.5, 8);
  const auto path = temp_path("roundtrip.sbs");
  write_stream(s, path);
  EXPECT_EQ(fs::file_size(path), 48u + 64u * 8u * 100u);
  const BitplaneStream r = read_stream(path);
  EXPECT_EQ(r.payload, s.payload);
  EXPECT_EQ(encode_header(r.header), encode_header(s.header));
  EXPECT_EQ(r.header.rng_seed, 8u);
  EXPECT_EQ(r.header.tau_bin, 1e-5);
}

TEST(StreamIo, HeaderLayoutIsLittleEndian) {
  StreamHeader h{0x0102, 3, 0x0A0B0C0D, 1.0, 0.5, 0.0, 0x1122334455667788ull};
  const auto b = encode_header(h);
  ASSERT_EQ(b.size(), 48u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "SBS1");
  EXPECT_EQ(b[4], 0x02);
  EXPECT_EQ(b[5], 0x01);
  EXPECT_EQ(b[8], 0x03);
  EXPECT_EQ(b[12], 0x0D);
  EXPECT_EQ(b[15], 0x0A);
  // tau_bin = 1.0 -> 0x3FF0000000000000
  EXPECT_EQ(b[16 + 7], 0x3F);
  EXPECT_EQ(b[16 + 6], 0xF0);
  EXPECT_EQ(b[40], 0x88);
  EXPECT_EQ(b[47], 0x11);
  const StreamHeader d = decode_header(b);
  EXPECT_EQ(encode_header(d), b);
}

TEST(StreamIo, DistinctErrorKinds) {
  const BitplaneStream s = random_stream(16, 4, 10, 0.5, 9);
  const auto path = temp_path("errors.sbs");
  write_stream(s, path);

  auto kind_of = [](const fs::path& p) {
    try {
      read_stream(p);
    } catch (const StreamError& e) {
      return e.kind();
    }
    return StreamError::Kind::io;
  };

  fs::resize_file(path, fs::file_size(path) - 1);
  EXPECT_EQ(kind_of(path), StreamError::Kind::truncated_payload);
  EXPECT_THROW({ StreamReader r(path); }, StreamError);

  write_stream(s, path);
  {
    std::ofstream app(path, std::ios::binary | std::ios::app);
    app.put('\0');
  }
  EXPECT_EQ(kind_of(path), StreamError::Kind::size_mismatch);

  auto bytes = encode_header(s.header);
  bytes[0] = 'X';
  {
    std::ofstream out(temp_path("magic.sbs"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_EQ(kind_of(temp_path("magic.sbs")), StreamError::Kind::bad_magic);

  StreamHeader zero_width = s.header;
  zero_width.width = 0;
  bytes = encode_header(zero_width);
  {
    std::ofstream out(temp_path("width0.sbs"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_EQ(kind_of(temp_path("width0.sbs")), StreamError::Kind::invalid_header);

  EXPECT_EQ(kind_of(temp_path("does_not_exist.sbs")), StreamError::Kind::io);
}

TEST(StreamIo, WriterEnforcesDeclaredFrameCount) {
  const BitplaneStream s = random_stream(9, 3, 5, 0.5, 10);
  const auto path = temp_path("writer.sbs");
  {
    StreamWriter w(path, s.header);
    for (std::size_t f = 0; f < 5; ++f) w.write(s.frame(f));
    EXPECT_THROW(w.write(s.frame(0)), StreamError);
    w.close();
  }
  EXPECT_EQ(read_stream(path).payload, s.payload);
  StreamWriter short_writer(temp_path("short.sbs"), s.header);
  short_writer.write(s.frame(0));
  EXPECT_THROW(short_writer.close(), StreamError);
}

}  // namespace
}  // namespace spad
