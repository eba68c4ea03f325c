// spadcli: scene generation, SPAD/conventional simulation, accumulation,
// flux reconstruction, HDR fusion, metrics and exposure sweeps.
//
// Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
// stderr; data goes to files (or stdout where noted).

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "spad/bitstream.hpp"
#include "spad/image_io.hpp"
#include "spad/metrics.hpp"
#include "spad/photon_model.hpp"
#include "spad/reconstruction.hpp"
#include "spad/simulator.hpp"
#include "spad/sweep.hpp"

namespace fs = std::filesystem;
using namespace spad;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out_dir() {
  const char* env = std::getenv("SPAD_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve_output(const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? default_out_dir() / path : path;
}

void require_input(const std::string& p) {
  if (!fs::is_regular_file(p)) throw DataError("input file not found: " + p);
}

std::string slurp(const std::string& p) {
  require_input(p);
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary sibling and renames on success, so a failing
// command leaves no partial output behind.
void write_atomic(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  try {
    writer(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_atomic(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw DataError("write failed: " + tmp.string());
  });
}

std::string exposure_label(double seconds) {
  char buf[64];
  if (seconds >= 1.0) {
    std::snprintf(buf, sizeof buf, "%.6g s", seconds);
  } else if (seconds >= 1e-3) {
    std::snprintf(buf, sizeof buf, "%.6g ms", seconds * 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%.6g us", seconds * 1e6);
  }
  return buf;
}

CountImage accumulate_file(const std::string& input, std::size_t first, long long frames,
                           StreamHeader& header) {
  require_input(input);
  StreamReader reader(input);
  header = reader.header();
  const std::size_t count = frames < 0 ? header.frame_count - std::min<std::size_t>(first, header.frame_count)
                                       : static_cast<std::size_t>(frames);
  return accumulate(reader, first, count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPAD camera simulation and reconstruction toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  // scene -------------------------------------------------------------------
  auto* scene = app.add_subcommand("scene", "Generate a flux map (PFM) from a JSON scene spec");
  std::string scene_spec, scene_out;
  std::size_t scene_w = 64, scene_h = 64;
  scene->add_option("--spec", scene_spec, "Scene JSON file or inline JSON")->required();
  scene->add_option("--width", scene_w)->check(CLI::PositiveNumber);
  scene->add_option("--height", scene_h)->check(CLI::PositiveNumber);
  scene->add_option("-o,--output", scene_out, "Output PFM")->required();

  // simulate ----------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Sample a binary frame stream (.sbs)");
  std::string sim_flux, sim_out;
  double sim_eta = 0.5, sim_dark = 0.0, sim_tau = 1e-5;
  std::uint32_t sim_frames = 256;
  std::uint64_t sim_seed = 1;
  simulate->add_option("--flux", sim_flux, "Input flux PFM")->required();
  simulate->add_option("--eta", sim_eta);
  simulate->add_option("--dark-rate", sim_dark);
  simulate->add_option("--tau-bin", sim_tau, "Binary frame exposure (s)");
  simulate->add_option("--frames", sim_frames)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("-o,--output", sim_out, "Output .sbs")->required();

  // accumulate --------------------------------------------------------------
  auto* acc = app.add_subcommand("accumulate", "Integrate binary frames into an n-bit PGM");
  std::string acc_in, acc_out;
  std::size_t acc_first = 0;
  long long acc_frames = -1;
  int acc_depth = 8;
  acc->add_option("-i,--input", acc_in, "Input .sbs")->required();
  acc->add_option("--first", acc_first);
  acc->add_option("--frames", acc_frames, "Frame count (default: 2^bit-depth)");
  acc->add_option("--bit-depth", acc_depth)->check(CLI::Range(1, 16));
  acc->add_option("-o,--output", acc_out, "Output PGM (sidecar JSON at <output>.json)")->required();

  // estimate ----------------------------------------------------------------
  auto* est = app.add_subcommand("estimate", "Per-pixel MLE flux image from a stream");
  std::string est_in, est_out, est_mask;
  std::size_t est_first = 0;
  long long est_frames = -1;
  est->add_option("-i,--input", est_in, "Input .sbs")->required();
  est->add_option("--first", est_first);
  est->add_option("--frames", est_frames, "Frame count (default: all remaining)");
  est->add_option("-o,--output", est_out, "Output PFM")->required();
  est->add_option("--mask", est_mask, "Saturation mask PGM (255 = saturated)");

  // hdr ---------------------------------------------------------------------
  auto* hdr = app.add_subcommand("hdr", "Joint maximum-likelihood HDR fusion of several streams");
  std::vector<std::string> hdr_in;
  std::string hdr_out, hdr_mask, hdr_report;
  hdr->add_option("-i,--input", hdr_in, "Input .sbs (repeat per exposure)")->required();
  hdr->add_option("-o,--output", hdr_out, "Output PFM")->required();
  hdr->add_option("--mask", hdr_mask, "Mask PGM (0 valid, 64 nonconverged, 128 underflow, 255 saturated)");
  hdr->add_option("--report", hdr_report, "JSON sidecar with dynamic range and solver stats");

  // conventional ------------------------------------------------------------
  auto* conv = app.add_subcommand("conventional", "Render a conventional-camera PGM");
  std::string conv_flux, conv_out;
  ConventionalCameraConfig ccfg;
  double conv_exposure = 1e-3, conv_optics = 1.0;
  std::uint64_t conv_seed = 1;
  conv->add_option("--flux", conv_flux, "Input flux PFM")->required();
  conv->add_option("--exposure", conv_exposure, "Exposure (s)")->required();
  conv->add_option("--eta-c", ccfg.eta_c);
  conv->add_option("--full-well", ccfg.full_well);
  conv->add_option("--read-noise", ccfg.read_noise);
  conv->add_option("--bit-depth", ccfg.bit_depth)->check(CLI::Range(1, 16));
  conv->add_option("--optics-scale", conv_optics);
  conv->add_option("--seed", conv_seed);
  conv->add_option("-o,--output", conv_out, "Output PGM")->required();

  // metrics -----------------------------------------------------------------
  auto* met = app.add_subcommand("metrics", "Image-quality metrics for PGM files");
  std::vector<std::string> met_in;
  std::string met_ref, met_out, met_config;
  double met_exposure = -1.0;
  bool met_csv = false;
  met->add_option("images", met_in, "Input PGM files")->required();
  met->add_option("--reference", met_ref, "Reference PGM for MS-SSIM and PSNR");
  met->add_option("--exposure", met_exposure, "Exposure label (s) stored in provenance");
  met->add_option("--config-label", met_config, "Configuration label stored in provenance");
  met->add_flag("--csv", met_csv, "Emit CSV instead of JSON");
  met->add_option("-o,--output", met_out, "Output file (default: stdout)");

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Illumination x exposure x camera-model grid to CSV");
  std::string sweep_cfg, sweep_dir;
  std::vector<std::string> sweep_set;
  sweep->add_option("-c,--config", sweep_cfg, "Run config JSON")->required();
  sweep->add_option("--set", sweep_set, "Override key=value (dotted keys)");
  sweep->add_option("--out-dir", sweep_dir, "Output directory (default: $SPAD_OUT_DIR or .)");

  // optimal-exposure --------------------------------------------------------
  auto* opt = app.add_subcommand("optimal-exposure", "Binary exposure maximizing per-frame Fisher information");
  double opt_phi = 0.0, opt_eta = 0.5, opt_dark = 0.0;
  opt->add_option("--flux", opt_phi, "Flux guess (photons/s)")->required();
  opt->add_option("--eta", opt_eta);
  opt->add_option("--dark-rate", opt_dark);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*scene) {
      const std::string text = (!scene_spec.empty() && scene_spec.front() == '{') ? scene_spec : slurp(scene_spec);
      const FluxMap map = generate_scene(parse_scene_spec(text), scene_w, scene_h);
      write_atomic(resolve_output(scene_out), [&](const fs::path& p) { write_pfm(map, p); });
    } else if (*simulate) {
      require_input(sim_flux);
      const FluxMap flux = read_pfm(sim_flux);
      SensorConfig cfg{sim_eta, sim_dark, sim_tau, static_cast<std::uint32_t>(flux.width),
                       static_cast<std::uint32_t>(flux.height)};
      const BitplaneStream s = simulate_spad(flux, cfg, sim_frames, sim_seed, threads);
      write_atomic(resolve_output(sim_out), [&](const fs::path& p) { write_stream(s, p); });
    } else if (*acc) {
      StreamHeader h;
      const long long frames = acc_frames < 0 ? (1ll << acc_depth) : acc_frames;
      const CountImage ci = accumulate_file(acc_in, acc_first, frames, h);
      const IntensityImage img = to_intensity(ci, acc_depth);
      const double total = static_cast<double>(ci.n_frames) * h.tau_bin;
      const std::string label = exposure_label(total);
      const fs::path out = resolve_output(acc_out);
      nlohmann::ordered_json side;
      side["source"] = acc_in;
      side["first_frame"] = acc_first;
      side["frames"] = ci.n_frames;
      side["bit_depth"] = acc_depth;
      side["tau_bin_s"] = h.tau_bin;
      side["total_exposure_s"] = total;
      side["total_exposure_label"] = label;
      side["equivalent_exposure_s"] = equivalent_exposure(acc_depth, h.tau_bin);
      write_atomic(out, [&](const fs::path& p) { write_pgm(img, p, "total exposure " + label); });
      fs::path side_path = out;
      side_path += ".json";
      write_text(side_path, side.dump(2) + "\n");
      std::cout << "total exposure: " << label << "\n";
    } else if (*est) {
      StreamHeader h;
      const CountImage ci = accumulate_file(est_in, est_first, est_frames, h);
      const FluxImageEstimate e = estimate_flux_image(ci, h.sensor(), threads);
      write_atomic(resolve_output(est_out), [&](const fs::path& p) { write_pfm(e.flux, p); });
      if (!est_mask.empty()) {
        IntensityImage m(ci.width, ci.height, 8);
        for (std::size_t i = 0; i < m.samples.size(); ++i) m.samples[i] = e.saturated[i] ? 255 : 0;
        write_atomic(resolve_output(est_mask), [&](const fs::path& p) { write_pgm(m, p); });
      }
    } else if (*hdr) {
      for (const auto& f : hdr_in) require_input(f);
      ExposureStack stack;
      for (std::size_t k = 0; k < hdr_in.size(); ++k) {
        StreamHeader h;
        CountImage ci = accumulate_file(hdr_in[k], 0, -1, h);
        if (k == 0) {
          stack.eta = h.eta;
          stack.dark_rate = h.dark_rate;
        } else if (h.eta != stack.eta || h.dark_rate != stack.dark_rate) {
          throw DataError("hdr: streams disagree on eta or dark_rate");
        }
        stack.entries.push_back({std::move(ci), h.tau_bin});
      }
      const HdrResult r = hdr_fuse(stack, threads);
      write_atomic(resolve_output(hdr_out), [&](const fs::path& p) { write_pfm(r.flux, p); });
      if (!hdr_mask.empty())
        write_atomic(resolve_output(hdr_mask), [&](const fs::path& p) { write_pgm(hdr_mask_image(r), p); });
      const std::string side = hdr_sidecar_json(r);
      if (!hdr_report.empty()) write_text(resolve_output(hdr_report), side + "\n");
      else std::cout << side << "\n";
    } else if (*conv) {
      require_input(conv_flux);
      const FluxMap flux = read_pfm(conv_flux);
      const IntensityImage img = simulate_conventional(flux, ccfg, conv_exposure, conv_seed, conv_optics, threads);
      write_atomic(resolve_output(conv_out), [&](const fs::path& p) { write_pgm(img, p); });
    } else if (*met) {
      std::vector<fs::path> files(met_in.begin(), met_in.end());
      std::optional<fs::path> ref;
      if (!met_ref.empty()) {
        require_input(met_ref);
        ref = met_ref;
      }
      const auto entries = report_batch(files, ref, met_config,
                                        met_exposure > 0 ? std::optional<double>(met_exposure) : std::nullopt);
      std::string text;
      if (met_csv) {
        std::ostringstream os;
        os << "source,width,height,bit_depth,contrast,entropy_bits,sharpness,ms_ssim,ms_ssim_scales,psnr_db,error\n";
        for (const auto& e : entries) {
          os << e.source;
          if (e.report) {
            const auto j = nlohmann::ordered_json::parse(report_to_json(*e.report));
            for (const char* k : {"width", "height", "bit_depth", "contrast", "entropy_bits", "sharpness",
                                  "ms_ssim", "ms_ssim_scales", "psnr_db"}) {
              const auto& v = j.at(k);
              os << ',' << (v.is_null() ? std::string{} : v.is_string() ? v.get<std::string>() : v.dump());
            }
            os << ",\n";
          } else {
            os << ",,,,,,,,,," << '"' << e.error << '"' << '\n';
          }
        }
        text = os.str();
      } else {
        text = batch_to_json(entries) + "\n";
      }
      if (met_out.empty()) std::cout << text;
      else write_text(resolve_output(met_out), text);
      for (const auto& e : entries)
        if (!e.report) std::cerr << "metrics: " << e.source << ": " << e.error << "\n";
    } else if (*sweep) {
      RunConfig cfg = parse_run_config(slurp(sweep_cfg), sweep_set);
      const fs::path dir = sweep_dir.empty() ? default_out_dir() : fs::path(sweep_dir);
      cfg.output_dir = dir.string();
      if (threads != 0) cfg.threads = threads;
      const auto rows = run_sweep(cfg);
      write_text(dir / "sweep.csv", sweep_to_csv(rows));
    } else if (*opt) {
      SensorConfig cfg{opt_eta, opt_dark, 1.0, 1, 1};
      const double tau = optimal_binary_exposure(opt_phi, cfg);
      std::printf("lambda* = %.6f\ntau* = %.9g s\n", optimal_lambda(), tau);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
