#include "spad/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "spad/bitstream.hpp"
#include "spad/image_io.hpp"
#include "spad/metrics.hpp"

namespace spad {

void RunConfig::validate() const {
  SensorConfig s = sensor;
  s.tau_bin = 1.0;
  s.validate();
  conventional.validate();
  if (spad_bit_depth < 1 || spad_bit_depth > 16) throw std::invalid_argument("spad_bit_depth must be in [1, 16]");
  if (illuminations.empty()) throw std::invalid_argument("sweep grid needs at least one illumination");
  if (exposures.empty()) throw std::invalid_argument("sweep grid needs at least one exposure");
  for (const auto& il : illuminations)
    if (!(il.flux_scale >= 0.0) || !std::isfinite(il.flux_scale))
      throw std::invalid_argument("illumination flux_scale must be >= 0");
  for (double e : exposures)
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("exposures must be > 0");
}

namespace {

using json = nlohmann::json;

void apply_override(json& doc, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must be key=value: " + kv);
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  std::string pointer;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) pointer += "/" + part;
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  doc[json::json_pointer(pointer)] = value;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(json_text);
    for (const auto& kv : overrides) apply_override(doc, kv);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run config JSON: ") + e.what());
  }

  RunConfig c;
  try {
    if (doc.contains("sensor")) {
      const auto& s = doc["sensor"];
      c.sensor.eta = s.value("eta", c.sensor.eta);
      c.sensor.dark_rate = s.value("dark_rate", c.sensor.dark_rate);
      c.sensor.width = s.value("width", 64u);
      c.sensor.height = s.value("height", 64u);
    } else {
      c.sensor.width = c.sensor.height = 64;
    }
    c.spad_bit_depth = doc.value("spad_bit_depth", c.spad_bit_depth);
    if (doc.contains("conventional")) {
      const auto& v = doc["conventional"];
      c.conventional.eta_c = v.value("eta_c", c.conventional.eta_c);
      c.conventional.full_well = v.value("full_well", c.conventional.full_well);
      c.conventional.read_noise = v.value("read_noise", c.conventional.read_noise);
      c.conventional.bit_depth = v.value("bit_depth", c.conventional.bit_depth);
      c.conventional_optics_scale = v.value("optics_scale", c.conventional_optics_scale);
    }
    if (!doc.contains("scene")) throw std::invalid_argument("run config needs a \"scene\"");
    c.scene = parse_scene_spec(doc["scene"].dump());
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      for (const auto& il : g.value("illuminations", json::array())) {
        if (il.is_number()) {
          c.illuminations.push_back({il.dump(), il.get<double>()});
        } else {
          c.illuminations.push_back({il.value("label", std::string{}), il.value("flux_scale", 1.0)});
        }
      }
      c.exposures = g.value("exposures", std::vector<double>{});
    }
    c.seed = doc.value("seed", c.seed);
    c.threads = doc.value("threads", c.threads);
    c.output_dir = doc.value("output_dir", c.output_dir);
    c.save_images = doc.value("save_images", c.save_images);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

const char* to_string(CameraModel model) {
  return model == CameraModel::spad ? "spad" : "conventional";
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

IntensityImage render_reference(const FluxMap& flux, int bit_depth) {
  IntensityImage img(flux.width, flux.height, bit_depth);
  const double peak = flux.flux.empty() ? 0.0 : *std::max_element(flux.flux.begin(), flux.flux.end());
  if (peak <= 0.0) return img;
  const double top = static_cast<double>(img.max_value());
  for (std::size_t i = 0; i < flux.size(); ++i)
    img.samples[i] = static_cast<std::uint16_t>(std::lround(top * flux.flux[i] / peak));
  return img;
}

namespace {

bool unusable(const IntensityImage& img) {
  const auto [lo, hi] = std::minmax_element(img.samples.begin(), img.samples.end());
  return *hi == 0 || *lo == img.max_value();
}

}  // namespace

std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
  cfg.validate();
  const FluxMap base = generate_scene(cfg.scene, cfg.sensor.width, cfg.sensor.height);
  const IntensityImage reference = render_reference(base, 8);
  const std::uint32_t frames = std::uint32_t{1} << cfg.spad_bit_depth;

  std::vector<SweepRow> rows;
  std::uint64_t cell = 0;
  for (const auto& il : cfg.illuminations) {
    FluxMap flux = base;
    for (auto& v : flux.flux) v *= il.flux_scale;
    double mean_flux = 0.0;
    for (double v : flux.flux) mean_flux += v;
    mean_flux /= static_cast<double>(flux.size());

    for (double exposure : cfg.exposures) {
      for (CameraModel model : {CameraModel::conventional, CameraModel::spad}) {
        SweepRow row;
        row.illumination = il.label;
        row.flux_scale = il.flux_scale;
        row.exposure_s = exposure;
        row.model = model;
        const std::uint64_t seed = derive_seed(cfg.seed, cell++);
        try {
          IntensityImage img;
          if (model == CameraModel::conventional) {
            row.mean_signal = mean_flux * cfg.conventional.eta_c * exposure * cfg.conventional_optics_scale;
            img = simulate_conventional(flux, cfg.conventional, exposure, seed,
                                        cfg.conventional_optics_scale, cfg.threads);
          } else {
            SensorConfig s = cfg.sensor;
            s.tau_bin = binary_exposure_for(cfg.spad_bit_depth, exposure);
            row.mean_signal = (mean_flux * s.eta + s.dark_rate) * exposure;
            const BitplaneStream stream = simulate_spad(flux, s, frames, seed, cfg.threads);
            img = to_intensity(accumulate(stream, 0, frames, cfg.threads), cfg.spad_bit_depth);
          }
          const MetricsReport rep = make_report(img, &reference, {});
          row.has_metrics = true;
          row.contrast = rep.contrast;
          row.entropy_bits = rep.entropy_bits;
          row.sharpness = rep.sharpness;
          row.ms_ssim = rep.ms_ssim.value_or(0.0);
          row.psnr_db = rep.psnr_db.value_or(0.0);
          row.status = unusable(img) ? "x" : "ok";
          if (cfg.save_images) {
            const auto dir = std::filesystem::path(cfg.output_dir) / "cells";
            std::filesystem::create_directories(dir);
            char name[96];
            std::snprintf(name, sizeof name, "cell%04llu_%s.pgm",
                          static_cast<unsigned long long>(cell - 1), to_string(model));
            write_pgm(img, dir / name);
          }
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
          row.has_metrics = false;
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

namespace {

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "illumination,flux_scale,exposure_s,model,status,mean_signal,contrast,entropy_bits,sharpness,ms_ssim,psnr_db\n";
  for (const auto& r : rows) {
    os << csv_field(r.illumination) << ',' << fmt_num(r.flux_scale) << ',' << fmt_num(r.exposure_s) << ','
       << to_string(r.model) << ',' << csv_field(r.status) << ',' << fmt_num(r.mean_signal);
    if (r.has_metrics) {
      os << ',' << fmt_num(r.contrast) << ',' << fmt_num(r.entropy_bits) << ',' << fmt_num(r.sharpness) << ','
         << fmt_num(r.ms_ssim) << ',' << fmt_num(r.psnr_db);
    } else {
      os << ",x,x,x,x,x";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace spad
