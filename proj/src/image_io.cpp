#include "spad/image_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace spad {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_dim(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(what);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ImageIoError(std::string("bad ") + what + " in header: '" + tok + "'");
  }
}

}  // namespace

void write_pgm(const IntensityImage& image, const std::filesystem::path& path,
               const std::string& comment) {
  image.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out << "P5\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << image.width << " " << image.height << "\n" << image.max_value() << "\n";
  if (image.bit_depth <= 8) {
    std::vector<std::uint8_t> buf(image.samples.begin(), image.samples.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  } else {
    std::vector<std::uint8_t> buf;
    buf.reserve(2 * image.samples.size());
    for (auto s : image.samples) {
      buf.push_back(static_cast<std::uint8_t>(s >> 8));
      buf.push_back(static_cast<std::uint8_t>(s & 0xFF));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw ImageIoError("write failed: " + path.string());
}

IntensityImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  if (next_token(in) != "P5") throw ImageIoError(path.string() + ": not a binary PGM (P5)");
  const std::size_t w = parse_dim(next_token(in), "width");
  const std::size_t h = parse_dim(next_token(in), "height");
  const std::size_t maxval = parse_dim(next_token(in), "maxval");
  if (maxval > 65535) throw ImageIoError("PGM maxval exceeds 65535");
  int depth = 1;
  while (((1u << depth) - 1u) < maxval) ++depth;

  IntensityImage img(w, h, depth);
  const std::size_t bps = maxval > 255 ? 2 : 1;
  std::vector<std::uint8_t> buf(w * h * bps);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw ImageIoError(path.string() + ": truncated PGM data");
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::uint32_t v = bps == 2 ? (std::uint32_t{buf[2 * i]} << 8) | buf[2 * i + 1] : buf[i];
    if (v > maxval) throw ImageIoError(path.string() + ": sample exceeds maxval");
    img.samples[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

void write_pfm(const FluxMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
  std::vector<std::uint8_t> buf;
  buf.reserve(4 * map.size());
  for (std::size_t row = map.height; row-- > 0;) {
    for (std::size_t x = 0; x < map.width; ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(map.at(x, row)));
      for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

FluxMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "Pf") throw ImageIoError(path.string() + ": not a grayscale PFM (Pf)");
  const std::size_t w = parse_dim(next_token(in), "width");
  const std::size_t h = parse_dim(next_token(in), "height");
  const std::string scale_tok = next_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ImageIoError(path.string() + ": bad PFM scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw ImageIoError(path.string() + ": bad PFM scale");
  const bool little = scale < 0.0;

  std::vector<std::uint8_t> buf(4 * w * h);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw ImageIoError(path.string() + ": truncated PFM data");

  FluxMap map(w, h);
  std::size_t i = 0;
  for (std::size_t row = h; row-- > 0;) {
    for (std::size_t x = 0; x < w; ++x, i += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const std::uint32_t byte = buf[i + static_cast<std::size_t>(b)];
        bits |= little ? byte << (8 * b) : byte << (8 * (3 - b));
      }
      map.at(x, row) = std::bit_cast<float>(bits);
    }
  }
  return map;
}

}  // namespace spad
