// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--only N] [--expect-fail N]...
// A criterion listed with --expect-fail still prints FAIL when it fails, but
// does not make the exit status nonzero.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spad/bitstream.hpp"
#include "spad/image_io.hpp"
#include "spad/metrics.hpp"
#include "spad/photon_model.hpp"
#include "spad/reconstruction.hpp"
#include "spad/simulator.hpp"
#include "spad/sweep.hpp"

using namespace spad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
  bool gated = true;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FluxMap uniform_flux(std::size_t w, std::size_t h, double level) { return FluxMap(w, h, level); }

// 1. Bernoulli fidelity.
Outcome bernoulli_fidelity() {
  const auto t0 = Clock::now();
  const std::uint32_t N = 10000;
  const SensorConfig cfg{1.0, 0.0, 1.0, 64, 64};
  const BitplaneStream s = simulate_spad(uniform_flux(64, 64, 1.0), cfg, N, 20240601);
  const CountImage ci = accumulate(s, 0, N);
  const double elapsed = seconds_since(t0);

  const double p = 1.0 - std::exp(-1.0);
  const double sigma = std::sqrt(p * (1.0 - p) / N);
  std::size_t inside = 0;
  for (auto c : ci.counts) inside += std::fabs(c / double(N) - p) <= 4.0 * sigma;
  const double frac = static_cast<double>(inside) / static_cast<double>(ci.counts.size());
  const auto gof = oracle::binomial_gof(ci.counts, N, p);
  return {frac >= 0.999 && gof.p_value > 1e-3 && elapsed < 10.0,
          fmt("within 4 sigma %.4f%% (>= 99.9%%), chi2 %.1f dof %d p %.3g (> 1e-3), %.2f s (< 10 s)",
              100.0 * frac, gof.statistic, gof.dof, gof.p_value, elapsed)};
}

// 2. Single-exposure estimator consistency.
Outcome estimator_consistency() {
  const auto t0 = Clock::now();
  const SensorConfig cfg{1.0, 0.0, 1.0, 64, 64};  // eta * tau = 1, phi = 1 gives lambda = 1
  const std::uint32_t N_max = 100000;
  const BitplaneStream s = simulate_spad(uniform_flux(64, 64, 1.0), cfg, N_max, 777);
  std::vector<double> medians;
  std::string detail;
  for (std::uint32_t N : {100u, 1000u, 10000u, 100000u}) {
    const auto est = estimate_flux_image(accumulate(s, 0, N), cfg);
    std::vector<double> err(est.flux.size());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::fabs(est.flux.flux[i] - 1.0);
    medians.push_back(median(err));
    detail += fmt("N=%u %.3f%%  ", N, 100.0 * medians.back());
  }
  const double elapsed = seconds_since(t0);
  bool monotone = true;
  for (std::size_t i = 1; i < medians.size(); ++i) monotone &= medians[i] < medians[i - 1];
  return {medians.back() < 0.01 && monotone && elapsed < 30.0,
          detail + fmt("(final < 1%%, decreasing: %s), %.2f s (< 30 s)", monotone ? "yes" : "no", elapsed)};
}

// 3. Dark-count correction.
Outcome dark_correction() {
  const double dark = 1e5, tau = 1e-5;  // r_d tau = 1
  const SensorConfig cfg{0.5, dark, tau, 1, 1};
  const std::uint32_t N = 100000;
  const CountImage ci = accumulate(simulate_spad(uniform_flux(1, 1, 0.0), cfg, N, 31337), 0, N);
  const FluxEstimate e = mle_flux(ci.counts[0], N, cfg);
  const bool zero_in_ci = e.ci_low <= 0.0 && 0.0 <= e.ci_high;
  const double rate_err = std::fabs(e.total_rate - dark) / dark;
  return {zero_in_ci && rate_err < 0.02,
          fmt("phi_hat %.4g in [%.4g, %.4g]: %s, total rate %.6g vs r_d %.6g (%.3f%%, < 2%%)", e.phi_hat,
              e.ci_low, e.ci_high, zero_in_ci ? "yes" : "no", e.total_rate, dark, 100.0 * rate_err)};
}

// 4. Exposure equivalence.
Outcome exposure_equivalence() {
  const double a = equivalent_exposure(8, 5e-6), b = equivalent_exposure(4, 5e-6);
  return {a == 1.28e-3 && b == 80e-6, fmt("d=8: %.17g s (1.28 ms), d=4: %.17g s (80 us)", a, b)};
}

// 5. HDR fusion over a 1e5 flux ratio.
Outcome hdr_fusion() {
  const auto t0 = Clock::now();
  const std::size_t W = 64, H = 64;
  const double eta = 0.5, phi_min = 1e3, ratio = 1e5;
  SceneSpec scene;
  scene.kind = SceneKind::hdr_step;
  scene.min_flux = phi_min;
  scene.ratio = ratio;
  const FluxMap truth = generate_scene(scene, W, H);

  // Long exposure puts the dim half at lambda = 0.0648, which equalizes the
  // Fisher-information-limited error of the dim and bright halves.
  const double tau_long = 0.0648 / (eta * phi_min), tau_short = tau_long / 1e3;
  const std::uint32_t N = 10000;
  ExposureStack stack;
  stack.eta = eta;
  for (auto [tau, seed] : {std::pair{tau_short, 501ull}, std::pair{tau_long, 502ull}}) {
    const SensorConfig cfg{eta, 0.0, tau, static_cast<std::uint32_t>(W), static_cast<std::uint32_t>(H)};
    stack.entries.push_back({accumulate(simulate_spad(truth, cfg, N, seed), 0, N), tau});
  }
  const HdrResult r = hdr_fuse(stack);
  const double elapsed = seconds_since(t0);

  std::size_t unmasked = 0, within = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!r.valid(i)) continue;
    ++unmasked;
    const double rel = std::fabs(r.flux.flux[i] - truth.flux[i]) / truth.flux[i];
    within += rel <= 0.05;
    worst = std::max(worst, rel);
  }
  const double dr = r.dynamic_range_db.value_or(0.0);
  return {unmasked > 0 && within == unmasked && dr >= 100.0 && elapsed < 60.0,
          fmt("%zu/%zu unmasked pixels within 5%% (worst %.2f%%), dynamic range %.2f dB (>= 100), %.2f s (< 60 s)",
              within, unmasked, 100.0 * worst, dr, elapsed)};
}

// 6. Newton HDR MLE against a derivative-free oracle.
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> log_phi(std::log(1e2), std::log(1e8));
  std::uniform_int_distribution<std::uint64_t> frames(500, 20000);
  const double eta = 0.5, dark = 50.0, tau_short = 1e-7, tau_long = 1e-4;
  std::size_t checked = 0, agree = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const double phi = std::exp(log_phi(gen));
    const std::uint64_t N1 = frames(gen), N2 = frames(gen);
    const double rho = phi * eta + dark;
    std::binomial_distribution<std::uint64_t> b1(N1, -std::expm1(-rho * tau_short));
    std::binomial_distribution<std::uint64_t> b2(N2, -std::expm1(-rho * tau_long));
    const std::uint64_t n1 = b1(gen), n2 = b2(gen);
    if ((n1 == 0 && n2 == 0) || (n1 == N1 && n2 == N2)) continue;
    const std::vector<PixelObservation> obs = {{n1, N1, tau_short}, {n2, N2, tau_long}};
    const PixelFit fit = fit_pixel(obs, eta, dark);
    if (fit.status != FitStatus::ok || fit.phi == 0.0) continue;  // boundary solutions have no interior optimum
    const std::vector<oracle::Exposure> oobs = {{n1, N1, tau_short}, {n2, N2, tau_long}};
    const double ref = oracle::grid_golden_argmax(oobs, eta, dark, 1e-1, 1e11, 1000000);
    const double rel = std::fabs(fit.phi - ref) / ref;
    worst = std::max(worst, rel);
    agree += rel <= 1e-6;
    ++checked;
  }
  return {agree == checked, fmt("%zu/%zu pixels within 1e-6 relative (worst %.2e), %.1f s", agree, checked, worst,
                                seconds_since(t0))};
}

// 7. Byte-identical outputs across runs and thread counts.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "spad_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const char* config = R"({
    "sensor": {"eta": 0.4, "dark_rate": 20, "width": 48, "height": 40},
    "spad_bit_depth": 6,
    "scene": {"kind": "texture", "low": 1e3, "high": 1e6, "period": 5, "seed": 3},
    "grid": {"illuminations": [0.01, 1], "exposures": [1e-4, 1e-2]},
    "seed": 17
  })";
  SceneSpec scene;
  scene.kind = SceneKind::texture;
  scene.low = 1e3;
  scene.high = 1e6;
  scene.period = 7;
  const FluxMap flux = generate_scene(scene, 97, 61);
  const SensorConfig cfg{0.5, 100.0, 1e-6, 97, 61};

  std::vector<std::string> variants;
  for (const auto& [run, threads] : {std::pair{0, 1u}, std::pair{1, 1u}, std::pair{0, 8u}, std::pair{1, 8u}}) {
    const std::string tag = fmt("r%d_t%u", run, threads);
    const BitplaneStream s = simulate_spad(flux, cfg, 512, 99, threads);
    write_stream(s, dir / (tag + ".sbs"));
    const CountImage ci = accumulate(s, 0, 256, threads);
    write_pgm(to_intensity(ci, 8), dir / (tag + ".pgm"));
    write_pfm(estimate_flux_image(accumulate(s, 0, 512, threads), cfg, threads).flux, dir / (tag + ".pfm"));
    {
      std::ofstream out(dir / (tag + ".csv"), std::ios::binary);
      out << sweep_to_csv(run_sweep(parse_run_config(config, {fmt("threads=%u", threads)})));
    }
    std::string all;
    for (const char* ext : {".sbs", ".pgm", ".pfm", ".csv"}) all += bytes(dir / (tag + ext)) + '|';
    variants.push_back(all);
  }
  const bool same = std::all_of(variants.begin(), variants.end(), [&](const auto& v) { return v == variants[0]; });
  return {same, fmt(".sbs, PGM, PFM and sweep CSV across 2 runs x {1, 8} threads: %s (%zu bytes each)",
                    same ? "byte-identical" : "DIFFER", variants[0].size())};
}

// 8. Metric examples.
Outcome metric_examples() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.push_back(name);
  };
  const IntensityImage flat(32, 32, 8, 91);
  check(rms_contrast(flat) == 0.0 && entropy(flat) == 0.0 && sharpness(flat) == 0.0, "constant zeros");
  IntensityImage all(16, 16, 8);
  for (std::size_t i = 0; i < 256; ++i) all.samples[i] = static_cast<std::uint16_t>(i);
  check(entropy(all) == 8.0, "uniform entropy 8");
  IntensityImage two(16, 16, 8);
  for (std::size_t i = 128; i < 256; ++i) two.samples[i] = 255;
  check(rms_contrast(two) == 0.5, "two-point contrast 0.5");

  SceneSpec tex;
  tex.kind = SceneKind::texture;
  tex.low = 0.1;
  tex.high = 0.9;
  tex.period = 6;
  GrayImage ref(192, 192);
  ref.pixels = generate_scene(tex, 192, 192).flux;
  check(ms_ssim(ref, ref) == 1.0, "MS-SSIM identity");
  auto noisy = [&](double sigma) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0.0, sigma);
    GrayImage g = ref;
    for (auto& v : g.pixels) v += n(gen);
    return g;
  };
  const GrayImage n1 = noisy(0.01), n2 = noisy(0.02), n5 = noisy(0.05);
  check(ms_ssim(n2, ref) == ms_ssim(ref, n2), "MS-SSIM symmetry");
  const double m1 = ms_ssim(n1, ref), m2 = ms_ssim(n2, ref), m5 = ms_ssim(n5, ref);
  check(m1 > m2 && m2 > m5, "MS-SSIM noise monotonicity");
  std::string detail = failed.empty() ? "all examples exact" : "failed:";
  for (const auto& f : failed) detail += " [" + f + "]";
  return {failed.empty(), detail + fmt(" (MS-SSIM at noise 0.01/0.02/0.05: %.4f/%.4f/%.4f)", m1, m2, m5)};
}

// 9. Photon-starved regime.
Outcome low_light() {
  const RunConfig cfg = parse_run_config(R"({
    "sensor": {"eta": 0.5, "width": 128, "height": 128},
    "spad_bit_depth": 8,
    "scene": {"kind": "texture", "low": 1e4, "high": 1e6, "period": 8, "seed": 9},
    "grid": {"illuminations": [{"label": "night", "flux_scale": 0.001}], "exposures": [1e-3]},
    "seed": 2026
  })");
  const auto rows = run_sweep(cfg);
  const SweepRow& conv = rows.at(0);
  const SweepRow& spad = rows.at(1);
  const bool ok = conv.mean_signal < 0.5 && spad.has_metrics && conv.has_metrics &&
                  spad.entropy_bits > conv.entropy_bits && spad.ms_ssim > conv.ms_ssim;
  return {ok, fmt("conventional mean %.3f e- (< 0.5): entropy %.4f bits, MS-SSIM %.4f; spad: entropy %.4f bits, "
                  "MS-SSIM %.4f",
                  conv.mean_signal, conv.entropy_bits, conv.ms_ssim, spad.entropy_bits, spad.ms_ssim)};
}

// 10. Accumulation throughput (reported only).
Outcome throughput() {
  const std::size_t W = 512, H = 512, F = 256;
  BitplaneStream s;
  s.header.width = W;
  s.header.height = H;
  s.header.frame_count = F;
  s.header.tau_bin = 1e-6;
  s.payload.resize(F * s.header.frame_bytes());
  std::mt19937_64 gen(10);
  for (auto& b : s.payload) b = static_cast<std::uint8_t>(gen());
  double best = INFINITY;
  std::uint64_t sink = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = Clock::now();
    const CountImage ci = accumulate(s, 0, F, 1);
    best = std::min(best, seconds_since(t0));
    sink += ci.counts[rep];
  }
  const double mb = static_cast<double>(s.payload.size()) / 1e6;
  return {best < 0.1,
          fmt("256 x 512x512 frames (%.1f MB), 1 thread: %.1f ms best of 5 (%.0f MB/s; goal < 100 ms) [%llu]", mb,
              1e3 * best, mb / best, static_cast<unsigned long long>(sink % 10)),
          false};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expect_fail;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else if (!std::strcmp(argv[i], "--expect-fail") && i + 1 < argc) {
      expect_fail.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--only N] [--expect-fail N]...\n", argv[0]);
      return 1;
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Bernoulli fidelity", bernoulli_fidelity},
      {"Estimator consistency", estimator_consistency},
      {"Dark-count correction", dark_correction},
      {"Exposure equivalence", exposure_equivalence},
      {"HDR fusion", hdr_fusion},
      {"Oracle equivalence", oracle_equivalence},
      {"Determinism", determinism},
      {"Metrics suite", metric_examples},
      {"Low-light regime", low_light},
      {"Throughput", throughput},
  };

  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* verdict = o.pass ? "PASS" : (o.gated ? "FAIL" : "MISS");
    std::string note;
    if (!o.gated) note = " (reported, not gated)";
    else if (!o.pass && expect_fail.count(id)) note = " (known infeasible, see README)";
    std::printf("[%s] %2d %s: %s%s\n", verdict, id, criteria[k].first, o.detail.c_str(), note.c_str());
    std::fflush(stdout);
    if (!o.pass && o.gated && !expect_fail.count(id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
