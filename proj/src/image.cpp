#include "spad/image.hpp"

#include <cmath>
#include <stdexcept>

namespace spad {

void FluxMap::validate() const {
  if (flux.size() != width * height) throw std::invalid_argument("flux map size mismatch");
  for (double v : flux)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("flux values must be finite and >= 0");
}

GrayImage IntensityImage::normalized() const {
  GrayImage g(width, height);
  const double scale = 1.0 / static_cast<double>(max_value());
  for (std::size_t i = 0; i < samples.size(); ++i) g.pixels[i] = samples[i] * scale;
  return g;
}

void IntensityImage::validate() const {
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit depth must be in [1, 16]");
  if (samples.size() != width * height) throw std::invalid_argument("image size mismatch");
  const auto maxv = max_value();
  for (auto s : samples)
    if (s > maxv) throw std::invalid_argument("sample exceeds declared bit depth");
}

}  // namespace spad
