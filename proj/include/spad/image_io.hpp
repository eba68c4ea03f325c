#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "spad/image.hpp"

namespace spad {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5). maxval is 2^d - 1; depths above 8 use 16-bit big-endian
/// samples. The optional comment is written as a "# ..." header line.
void write_pgm(const IntensityImage& image, const std::filesystem::path& path,
               const std::string& comment = {});
/// Reads P5; the bit depth is the smallest d with 2^d - 1 >= maxval.
IntensityImage read_pgm(const std::filesystem::path& path);

/// Grayscale PFM ("Pf"), little-endian (negative scale), rows bottom-to-top.
void write_pfm(const FluxMap& map, const std::filesystem::path& path);
/// Accepts either byte order, as signalled by the sign of the scale field.
FluxMap read_pfm(const std::filesystem::path& path);

}  // namespace spad
