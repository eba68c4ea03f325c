#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spad {

/// Per-pixel photon flux in photons/second, row-major.
struct FluxMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> flux;

  FluxMap() = default;
  FluxMap(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), flux(w * h, fill) {}

  std::size_t size() const { return flux.size(); }
  double& at(std::size_t x, std::size_t y) { return flux[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return flux[y * width + x]; }

  /// Throws std::invalid_argument unless every value is finite and >= 0.
  void validate() const;
};

/// Real-valued grayscale image on [0, 1] (the normalized view).
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), pixels(w * h, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

/// Integer image with a declared bit depth d; samples lie in [0, 2^d - 1].
struct IntensityImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;

  IntensityImage() = default;
  IntensityImage(std::size_t w, std::size_t h, int depth, std::uint16_t fill = 0)
      : width(w), height(h), bit_depth(depth), samples(w * h, fill) {
    if (depth < 1 || depth > 16) throw std::invalid_argument("bit depth must be in [1, 16]");
  }

  std::size_t size() const { return samples.size(); }
  std::uint32_t max_value() const { return (1u << bit_depth) - 1u; }
  std::uint16_t& at(std::size_t x, std::size_t y) { return samples[y * width + x]; }
  std::uint16_t at(std::size_t x, std::size_t y) const { return samples[y * width + x]; }

  /// sample / (2^d - 1) per pixel.
  GrayImage normalized() const;

  /// Throws std::invalid_argument if a sample exceeds the declared range.
  void validate() const;
};

/// One byte per pixel: 0 = clear, nonzero = flagged.
using Mask = std::vector<std::uint8_t>;

}  // namespace spad
