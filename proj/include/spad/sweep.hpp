#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spad/image.hpp"
#include "spad/photon_model.hpp"
#include "spad/simulator.hpp"

namespace spad {

/// One illumination setting: the scene flux is multiplied by flux_scale.
/// The label is free-form (e.g. a lux value); no photometric conversion is done.
struct IlluminationLevel {
  std::string label;
  double flux_scale = 1.0;
};

struct RunConfig {
  SensorConfig sensor;  ///< tau_bin is derived per exposure cell
  int spad_bit_depth = 8;
  ConventionalCameraConfig conventional;
  double conventional_optics_scale = 1.0;
  SceneSpec scene;
  std::vector<IlluminationLevel> illuminations;
  std::vector<double> exposures;  ///< total exposure per cell, seconds
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output_dir = ".";
  bool save_images = false;

  /// Throws std::invalid_argument on an empty grid or invalid member.
  void validate() const;
};

/// Parses a JSON config, then applies "dotted.key=value" overrides in order.
/// Values are parsed as JSON when possible and as strings otherwise.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});

enum class CameraModel { conventional, spad };
const char* to_string(CameraModel model);

struct SweepRow {
  std::string illumination;
  double flux_scale = 0.0;
  double exposure_s = 0.0;
  CameraModel model = CameraModel::spad;
  std::string status;  ///< "ok", "x" (all-dark / all-saturated), or "error: ..."
  bool has_metrics = false;
  double mean_signal = 0.0;  ///< mean expected electrons or detections per pixel
  double contrast = 0.0;
  double entropy_bits = 0.0;
  double sharpness = 0.0;
  double ms_ssim = 0.0;
  double psnr_db = 0.0;
};

/// Ground-truth rendering used as the MS-SSIM/PSNR reference:
/// round((2^d - 1) * flux / max(flux)).
IntensityImage render_reference(const FluxMap& flux, int bit_depth = 8);

/// Runs every (illumination, exposure, model) cell in grid order. A failing
/// cell is recorded in its row; the sweep never aborts mid-grid.
std::vector<SweepRow> run_sweep(const RunConfig& cfg);

/// Header plus one row per cell. Metric columns of errored cells hold "x".
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Mixes a base seed with a cell index (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace spad
