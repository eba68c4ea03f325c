#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spad/bitstream.hpp"
#include "spad/image.hpp"
#include "spad/photon_model.hpp"

namespace spad {

struct FluxImageEstimate {
  FluxMap flux;
  Mask saturated;  ///< 1 where every frame detected (value is the n = N - 1 floor)
};

/// Per-pixel mle_flux over a count image.
FluxImageEstimate estimate_flux_image(const CountImage& ci, const SensorConfig& cfg,
                                      unsigned threads = 0);

/// One exposure of a stack: counts over counts.n_frames frames at tau_bin.
struct ExposureEntry {
  CountImage counts;
  double tau_bin = 0.0;
};

struct ExposureStack {
  std::vector<ExposureEntry> entries;
  double eta = 1.0;
  double dark_rate = 0.0;

  /// Throws std::invalid_argument if empty, mismatched, or out of range.
  void validate() const;
};

/// (n_j, N_j, tau_j) for one pixel and one exposure.
struct PixelObservation {
  std::uint64_t n = 0;
  std::uint64_t frames = 0;
  double tau = 0.0;
};

/// Joint Bernoulli log-likelihood in the total rate rho = phi*eta + r_d:
///   sum_j n_j ln(1 - exp(-rho tau_j)) - (N_j - n_j) rho tau_j
double stack_log_likelihood(std::span<const PixelObservation> obs, double rate);

enum class FitStatus : std::uint8_t { ok, saturated, underflow, nonconverged };

struct PixelFit {
  double rate = 0.0;  ///< fitted total rate rho
  double phi = 0.0;   ///< dark-corrected flux
  FitStatus status = FitStatus::ok;
  int iterations = 0;
};

/// Maximizes stack_log_likelihood over rho >= dark_rate.
///
/// Newton on the score, kept inside a sign bracket and falling back to
/// bisection whenever a step leaves it. Converged when the relative step is
/// below 1e-10; 100 iterations without convergence gives nonconverged.
PixelFit fit_pixel(std::span<const PixelObservation> obs, double eta, double dark_rate);

struct SolverStats {
  std::uint64_t pixels = 0;
  std::uint64_t saturated = 0;
  std::uint64_t underflow = 0;
  std::uint64_t nonconverged = 0;
  int max_iterations = 0;
  double mean_iterations = 0.0;
};

struct HdrResult {
  FluxMap flux;
  Mask saturated_mask;     ///< every exposure saturated
  Mask underflow_mask;     ///< zero detections in every exposure
  Mask nonconverged_mask;  ///< solver gave up; value not trustworthy
  std::optional<double> dynamic_range_db;
  SolverStats stats;

  bool valid(std::size_t i) const {
    return !saturated_mask[i] && !underflow_mask[i] && !nonconverged_mask[i];
  }
};

HdrResult hdr_fuse(const ExposureStack& stack, unsigned threads = 0);

/// 20 log10(p99.9 / p0.1) over the valid (unmasked) pixels of a result.
/// Throws std::domain_error with fewer than two valid pixels or a
/// non-positive robust minimum.
double dynamic_range_db(const HdrResult& result);
double dynamic_range_db(std::vector<double> values);

/// Linear-interpolation percentile (q in [0, 100]) of sorted data.
double percentile_sorted(std::span<const double> sorted, double q);

/// Mask image: 0 valid, 64 nonconverged, 128 underflow, 255 saturated.
IntensityImage hdr_mask_image(const HdrResult& result);

/// Solver statistics and dynamic range as a JSON document.
std::string hdr_sidecar_json(const HdrResult& result);

}  // namespace spad
