#pragma once

#include <cstdint>
#include <optional>

namespace spad {

/// SPAD pixel parameters shared by every pixel of the array.
struct SensorConfig {
  double eta = 0.5;        ///< effective detection efficiency (QE x fill factor)
  double dark_rate = 0.0;  ///< dark counts per second per pixel
  double tau_bin = 1e-5;   ///< binary frame exposure, seconds
  std::uint32_t width = 1;
  std::uint32_t height = 1;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

struct PhotonStatistics {
  double lambda = 0.0;    ///< expected detections per frame
  double p_detect = 0.0;  ///< 1 - exp(-lambda)
};

struct FluxEstimate {
  double phi_hat = 0.0;     ///< photons/second, dark-corrected, >= 0
  double total_rate = 0.0;  ///< raw detection rate (phi*eta + r_d) before correction
  bool saturated = false;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t n_detections = 0;
  std::uint64_t n_frames = 0;
};

/// Two-sided 95% normal quantile used for the Wilson interval.
inline constexpr double kWilsonZ = 1.959963984540054;

/// lambda^k e^-lambda / k!, evaluated in log space.
double poisson_pmf(std::int64_t k, double lambda);

PhotonStatistics expected_detections(double phi, const SensorConfig& cfg);

/// Maximum-likelihood flux from n detections in N binary frames.
///
/// The total rate -ln(1 - n/N)/tau is corrected for dark counts and divided
/// by eta. At n = N the estimate diverges; the result is flagged saturated and
/// carries the n = N - 1 value as a floor, with ci_high = +inf.
FluxEstimate mle_flux(std::uint64_t n, std::uint64_t N, const SensorConfig& cfg,
                      double z = kWilsonZ);

/// Maps a total detection rate (phi*eta + r_d) to a dark-corrected flux >= 0.
double flux_from_rate(double total_rate, const SensorConfig& cfg);

/// Wilson score interval on a binomial proportion.
struct WilsonInterval {
  double low;
  double high;
};
WilsonInterval wilson_interval(std::uint64_t n, std::uint64_t N, double z = kWilsonZ);

/// Per-frame Fisher information about phi, (eta tau)^2 / (e^lambda - 1).
///
/// Returns std::nullopt at lambda = 0, where the information diverges.
std::optional<double> fisher_information_per_frame(double phi, const SensorConfig& cfg);

/// g(lambda) = lambda^2 e^-lambda / (1 - e^-lambda); proportional to the
/// per-frame information at fixed total rate.
double exposure_information_shape(double lambda);

/// argmax of exposure_information_shape on [0.1, 10] by golden-section search.
double optimal_lambda();

/// Binary exposure tau* maximizing per-frame information at the guessed flux.
double optimal_binary_exposure(double phi_guess, const SensorConfig& cfg);

}  // namespace spad
