#include "spad/photon_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spad {

void SensorConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must be in (0, 1]");
  if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
    throw std::invalid_argument("dark_rate must be finite and >= 0");
  if (!(tau_bin > 0.0) || !std::isfinite(tau_bin))
    throw std::invalid_argument("tau_bin must be finite and > 0");
  if (width < 1 || height < 1) throw std::invalid_argument("width and height must be >= 1");
}

double poisson_pmf(std::int64_t k, double lambda) {
  if (k < 0) throw std::domain_error("poisson_pmf: k must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::domain_error("poisson_pmf: lambda must be finite and >= 0");
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0));
}

PhotonStatistics expected_detections(double phi, const SensorConfig& cfg) {
  if (!(phi >= 0.0)) throw std::domain_error("expected_detections: phi must be >= 0");
  PhotonStatistics s;
  s.lambda = (phi * cfg.eta + cfg.dark_rate) * cfg.tau_bin;
  s.p_detect = -std::expm1(-s.lambda);
  return s;
}

double flux_from_rate(double total_rate, const SensorConfig& cfg) {
  if (std::isinf(total_rate)) return total_rate;
  return std::max(0.0, (total_rate - cfg.dark_rate) / cfg.eta);
}

namespace {

// Total detection rate for a detection probability p < 1.
double rate_from_probability(double p, double tau) { return -std::log1p(-p) / tau; }

}  // namespace

WilsonInterval wilson_interval(std::uint64_t n, std::uint64_t N, double z) {
  if (N == 0 || n > N) throw std::domain_error("wilson_interval: need 0 <= n <= N, N >= 1");
  const double Nd = static_cast<double>(N);
  const double p = static_cast<double>(n) / Nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / Nd;
  const double center = (p + z2 / (2.0 * Nd)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / Nd + z2 / (4.0 * Nd * Nd));
  WilsonInterval w{std::max(0.0, center - half), std::min(1.0, center + half)};
  // Guard rounding at the boundaries, where the exact bound is 0 or 1.
  if (n == 0) w.low = 0.0;
  if (n == N) w.high = 1.0;
  return w;
}

FluxEstimate mle_flux(std::uint64_t n, std::uint64_t N, const SensorConfig& cfg, double z) {
  if (N == 0) throw std::domain_error("mle_flux: frame count must be >= 1");
  if (n > N) throw std::domain_error("mle_flux: detections exceed frame count");

  FluxEstimate est;
  est.n_detections = n;
  est.n_frames = N;
  const double Nd = static_cast<double>(N);
  const WilsonInterval wi = wilson_interval(n, N, z);

  if (n == N) {
    est.saturated = true;
    est.total_rate = rate_from_probability(static_cast<double>(N - 1) / Nd, cfg.tau_bin);
    est.phi_hat = flux_from_rate(est.total_rate, cfg);
    est.ci_low = flux_from_rate(rate_from_probability(wi.low, cfg.tau_bin), cfg);
    est.ci_high = std::numeric_limits<double>::infinity();
    return est;
  }

  est.total_rate = rate_from_probability(static_cast<double>(n) / Nd, cfg.tau_bin);
  est.phi_hat = flux_from_rate(est.total_rate, cfg);
  est.ci_low = flux_from_rate(rate_from_probability(wi.low, cfg.tau_bin), cfg);
  est.ci_high = flux_from_rate(rate_from_probability(wi.high, cfg.tau_bin), cfg);
  return est;
}

std::optional<double> fisher_information_per_frame(double phi, const SensorConfig& cfg) {
  if (!(phi >= 0.0)) throw std::domain_error("fisher_information_per_frame: phi must be >= 0");
  const double lambda = expected_detections(phi, cfg).lambda;
  if (lambda == 0.0) return std::nullopt;
  const double scale = cfg.eta * cfg.tau_bin;
  return scale * scale / std::expm1(lambda);
}

double exposure_information_shape(double lambda) {
  if (lambda == 0.0) return 0.0;
  return lambda * lambda / std::expm1(lambda);
}

double optimal_lambda() {
  static const double cached = [] {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.1, b = 10.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = exposure_information_shape(c);
    double fd = exposure_information_shape(d);
    while (b - a > 1e-12) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = exposure_information_shape(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = exposure_information_shape(d);
      }
    }
    return 0.5 * (a + b);
  }();
  return cached;
}

double optimal_binary_exposure(double phi_guess, const SensorConfig& cfg) {
  if (!(phi_guess >= 0.0)) throw std::domain_error("optimal_binary_exposure: phi must be >= 0");
  const double rate = phi_guess * cfg.eta + cfg.dark_rate;
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw std::domain_error("optimal_binary_exposure: total rate must be positive");
  return optimal_lambda() / rate;
}

}  // namespace spad
