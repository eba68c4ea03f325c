#include "spad/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "spad/parallel.hpp"

namespace spad {

FluxImageEstimate estimate_flux_image(const CountImage& ci, const SensorConfig& cfg,
                                      unsigned threads) {
  cfg.validate();
  if (ci.width != cfg.width || ci.height != cfg.height || ci.counts.size() != ci.width * ci.height)
    throw std::invalid_argument("estimate_flux_image: count image does not match sensor");
  FluxImageEstimate out{FluxMap(ci.width, ci.height), Mask(ci.counts.size(), 0)};
  parallel_for_chunks(ci.counts.size(), threads, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const FluxEstimate e = mle_flux(ci.counts[i], ci.n_frames, cfg);
      out.flux.flux[i] = e.phi_hat;
      out.saturated[i] = e.saturated ? 1 : 0;
    }
  });
  return out;
}

void ExposureStack::validate() const {
  if (entries.empty()) throw std::invalid_argument("exposure stack is empty");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("exposure stack: eta must be in (0, 1]");
  if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
    throw std::invalid_argument("exposure stack: dark_rate must be >= 0");
  const auto& first = entries.front().counts;
  for (const auto& e : entries) {
    if (e.counts.width != first.width || e.counts.height != first.height ||
        e.counts.counts.size() != first.width * first.height)
      throw std::invalid_argument("exposure stack: dimension mismatch");
    if (!(e.tau_bin > 0.0) || !std::isfinite(e.tau_bin))
      throw std::invalid_argument("exposure stack: tau_bin must be > 0");
    if (e.counts.n_frames == 0) throw std::invalid_argument("exposure stack: entry has no frames");
    for (auto c : e.counts.counts)
      if (c > e.counts.n_frames) throw std::invalid_argument("exposure stack: count exceeds frame count");
  }
}

double stack_log_likelihood(std::span<const PixelObservation> obs, double rate) {
  double ll = 0.0;
  for (const auto& o : obs) {
    const double x = rate * o.tau;
    if (o.n > 0) ll += static_cast<double>(o.n) * std::log(-std::expm1(-x));
    ll -= static_cast<double>(o.frames - o.n) * x;
  }
  return ll;
}

namespace {

struct ScoreCurvature {
  double score;      // d ell / d rho
  double curvature;  // d^2 ell / d rho^2 (< 0)
};

ScoreCurvature score_and_curvature(std::span<const PixelObservation> obs, double rate) {
  ScoreCurvature sc{0.0, 0.0};
  for (const auto& o : obs) {
    const double x = rate * o.tau;
    if (o.n > 0) {
      const double em1 = std::expm1(x);
      const double nd = static_cast<double>(o.n);
      sc.score += nd * o.tau / em1;
      sc.curvature -= nd * o.tau * o.tau / (em1 * -std::expm1(-x));
    }
    sc.score -= static_cast<double>(o.frames - o.n) * o.tau;
  }
  return sc;
}

double single_rate(const PixelObservation& o) {
  return -std::log1p(-static_cast<double>(o.n) / static_cast<double>(o.frames)) / o.tau;
}

}  // namespace

PixelFit fit_pixel(std::span<const PixelObservation> obs, double eta, double dark_rate) {
  PixelFit fit;
  const auto to_phi = [&](double rate) { return std::max(0.0, (rate - dark_rate) / eta); };

  bool any_detection = false, all_saturated = true;
  for (const auto& o : obs) {
    any_detection |= o.n > 0;
    all_saturated &= o.n == o.frames;
  }
  if (!any_detection) {
    fit.status = FitStatus::underflow;
    fit.rate = dark_rate;
    fit.phi = 0.0;
    return fit;
  }
  if (all_saturated) {
    // Lower bound: the largest single-exposure n = N - 1 floor.
    fit.status = FitStatus::saturated;
    for (const auto& o : obs) fit.rate = std::max(fit.rate, single_rate({o.frames - 1, o.frames, o.tau}));
    fit.phi = to_phi(fit.rate);
    return fit;
  }

  double lo = dark_rate;
  if (dark_rate > 0.0 && score_and_curvature(obs, lo).score <= 0.0) {
    fit.rate = dark_rate;
    fit.phi = 0.0;
    return fit;
  }

  // Upper end of the bracket: ten times the shortest unsaturated exposure's
  // estimate, widened until the score turns negative.
  const PixelObservation* shortest = nullptr;
  const PixelObservation* best = nullptr;
  for (const auto& o : obs) {
    if (o.n == o.frames) continue;
    if (!shortest || o.tau < shortest->tau) shortest = &o;
    if (o.n > 0) {
      const double p = static_cast<double>(o.n) / static_cast<double>(o.frames);
      const double pb = best ? static_cast<double>(best->n) / static_cast<double>(best->frames) : -1.0;
      if (std::fabs(p - 0.8) < std::fabs(pb - 0.8)) best = &o;
    }
  }
  double hi = 10.0 * single_rate({std::max<std::uint64_t>(shortest->n, 1), shortest->frames, shortest->tau});
  hi = std::max(hi, 2.0 * lo);
  for (int i = 0; i < 2000 && score_and_curvature(obs, hi).score > 0.0; ++i) {
    lo = hi;
    hi *= 2.0;
  }

  double rate = best ? single_rate(*best) : 0.5 * (lo + hi);
  if (!(rate > lo && rate < hi)) rate = 0.5 * (lo + hi);

  for (int it = 1; it <= 100; ++it) {
    fit.iterations = it;
    const ScoreCurvature sc = score_and_curvature(obs, rate);
    if (sc.score == 0.0) {
      fit.rate = rate;
      fit.phi = to_phi(rate);
      return fit;
    }
    if (sc.score > 0.0) {
      lo = rate;
    } else {
      hi = rate;
    }
    double next = rate - sc.score / sc.curvature;
    const bool tiny = std::fabs(next - rate) < 1e-10 * rate;
    if (!tiny && !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - rate);
    rate = next;
    if (tiny || step < 1e-10 * rate || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      fit.rate = rate;
      fit.phi = to_phi(rate);
      return fit;
    }
  }
  fit.status = FitStatus::nonconverged;
  fit.rate = rate;
  fit.phi = to_phi(rate);
  return fit;
}

HdrResult hdr_fuse(const ExposureStack& stack, unsigned threads) {
  stack.validate();
  const auto& ref = stack.entries.front().counts;
  const std::size_t n_pixels = ref.counts.size();
  HdrResult r;
  r.flux = FluxMap(ref.width, ref.height);
  r.saturated_mask.assign(n_pixels, 0);
  r.underflow_mask.assign(n_pixels, 0);
  r.nonconverged_mask.assign(n_pixels, 0);
  std::vector<int> iterations(n_pixels, 0);

  parallel_for_chunks(n_pixels, threads, [&](std::size_t i0, std::size_t i1) {
    std::vector<PixelObservation> obs(stack.entries.size());
    for (std::size_t i = i0; i < i1; ++i) {
      for (std::size_t j = 0; j < stack.entries.size(); ++j) {
        const auto& e = stack.entries[j];
        obs[j] = {e.counts.counts[i], e.counts.n_frames, e.tau_bin};
      }
      const PixelFit fit = fit_pixel(obs, stack.eta, stack.dark_rate);
      r.flux.flux[i] = fit.phi;
      iterations[i] = fit.iterations;
      r.saturated_mask[i] = fit.status == FitStatus::saturated;
      r.underflow_mask[i] = fit.status == FitStatus::underflow;
      r.nonconverged_mask[i] = fit.status == FitStatus::nonconverged;
    }
  });

  SolverStats& st = r.stats;
  st.pixels = n_pixels;
  double iter_sum = 0.0;
  for (std::size_t i = 0; i < n_pixels; ++i) {
    st.saturated += r.saturated_mask[i];
    st.underflow += r.underflow_mask[i];
    st.nonconverged += r.nonconverged_mask[i];
    st.max_iterations = std::max(st.max_iterations, iterations[i]);
    iter_sum += iterations[i];
  }
  st.mean_iterations = n_pixels ? iter_sum / static_cast<double>(n_pixels) : 0.0;

  try {
    r.dynamic_range_db = dynamic_range_db(r);
  } catch (const std::domain_error&) {
    r.dynamic_range_db.reset();
  }
  return r;
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::domain_error("percentile of empty data");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= sorted.size()) return sorted.back();
  const double t = pos - static_cast<double>(k);
  return sorted[k] + t * (sorted[k + 1] - sorted[k]);
}

double dynamic_range_db(std::vector<double> values) {
  if (values.size() < 2) throw std::domain_error("dynamic range needs at least two valid pixels");
  std::sort(values.begin(), values.end());
  const double lo = percentile_sorted(values, 0.1);
  const double hi = percentile_sorted(values, 99.9);
  if (!(lo > 0.0)) throw std::domain_error("dynamic range undefined: robust minimum is not positive");
  return 20.0 * std::log10(hi / lo);
}

double dynamic_range_db(const HdrResult& result) {
  std::vector<double> values;
  values.reserve(result.flux.size());
  for (std::size_t i = 0; i < result.flux.size(); ++i)
    if (result.valid(i)) values.push_back(result.flux.flux[i]);
  return dynamic_range_db(std::move(values));
}

IntensityImage hdr_mask_image(const HdrResult& result) {
  IntensityImage img(result.flux.width, result.flux.height, 8);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (result.saturated_mask[i]) img.samples[i] = 255;
    else if (result.underflow_mask[i]) img.samples[i] = 128;
    else if (result.nonconverged_mask[i]) img.samples[i] = 64;
  }
  return img;
}

std::string hdr_sidecar_json(const HdrResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = "spad-hdr/1";
  j["width"] = r.flux.width;
  j["height"] = r.flux.height;
  j["dynamic_range_db"] = r.dynamic_range_db ? nlohmann::ordered_json(*r.dynamic_range_db) : nullptr;
  j["pixels"] = r.stats.pixels;
  j["saturated"] = r.stats.saturated;
  j["underflow"] = r.stats.underflow;
  j["nonconverged"] = r.stats.nonconverged;
  j["max_iterations"] = r.stats.max_iterations;
  j["mean_iterations"] = r.stats.mean_iterations;
  return j.dump(2);
}

}  // namespace spad
