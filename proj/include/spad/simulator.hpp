#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "spad/bitstream.hpp"
#include "spad/image.hpp"
#include "spad/photon_model.hpp"

namespace spad {

enum class SceneKind { uniform, gradient, checkerboard, hdr_step, disk, texture };

/// Synthetic flux scene. Only the fields of the selected kind are read:
///  - uniform:      level
///  - gradient:     low (left column) .. high (right column), linear
///  - checkerboard: low / high, period = pixels per full cycle (even, >= 2)
///  - hdr_step:     left half min_flux, right half min_flux * ratio
///  - disk:         level inside radius around (center_x, center_y), background outside
///  - texture:      smooth value noise in [low, high], lattice spacing period, seeded
struct SceneSpec {
  SceneKind kind = SceneKind::uniform;
  double level = 0.0;
  double low = 0.0;
  double high = 0.0;
  std::size_t period = 2;
  double min_flux = 100.0;
  double ratio = 1e5;
  double center_x = -1.0;  ///< pixels; negative means image center
  double center_y = -1.0;
  double radius = 0.0;
  double background = 0.0;
  std::uint64_t seed = 0;
};

SceneSpec parse_scene_spec(const std::string& json_text);
std::string scene_spec_to_json(const SceneSpec& spec);
const char* to_string(SceneKind kind);

/// Deterministic flux map. Throws std::invalid_argument on bad levels or geometry.
FluxMap generate_scene(const SceneSpec& spec, std::size_t width, std::size_t height);

/// Samples N binary frames. Each bit is an independent Bernoulli draw with
/// p = 1 - exp(-(phi*eta + r_d)*tau), addressed by (seed, frame, pixel) in a
/// Philox stream, so the output is identical for any thread count.
BitplaneStream simulate_spad(const FluxMap& flux, const SensorConfig& cfg, std::uint32_t n_frames,
                             std::uint64_t seed, unsigned threads = 0);

/// Writes frames [first, first + count) into out (count * frame_bytes bytes).
void simulate_spad_frames(const FluxMap& flux, const SensorConfig& cfg, std::uint64_t seed,
                          std::uint64_t first, std::size_t count, std::span<std::uint8_t> out,
                          unsigned threads = 0);

struct ConventionalCameraConfig {
  double eta_c = 0.7;
  double full_well = 10000.0;  ///< electrons
  double read_noise = 2.5;     ///< electrons RMS
  int bit_depth = 8;

  void validate() const;
};

/// Charge-integrating reference camera: Poisson shot noise plus Gaussian read
/// noise, clipped to [0, full_well], quantized as floor(e * (2^d - 1) / full_well).
/// optics_scale multiplies the collected signal (relative optical throughput).
IntensityImage simulate_conventional(const FluxMap& flux, const ConventionalCameraConfig& ccfg,
                                     double exposure, std::uint64_t seed,
                                     double optics_scale = 1.0, unsigned threads = 0);

}  // namespace spad
