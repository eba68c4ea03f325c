#include "spad/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>
#include <vector>

#include "spad/parallel.hpp"
#include "spad/rng.hpp"

namespace spad {

// ---------------------------------------------------------------------------
// Scenes

const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::uniform: return "uniform";
    case SceneKind::gradient: return "gradient";
    case SceneKind::checkerboard: return "checkerboard";
    case SceneKind::hdr_step: return "hdr-step";
    case SceneKind::disk: return "disk";
    case SceneKind::texture: return "texture";
  }
  return "unknown";
}

namespace {

SceneKind parse_kind(const std::string& s) {
  for (auto k : {SceneKind::uniform, SceneKind::gradient, SceneKind::checkerboard,
                 SceneKind::hdr_step, SceneKind::disk, SceneKind::texture})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

void require_level(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0)
    throw std::invalid_argument(std::string("scene: ") + name + " must be finite and >= 0");
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scene JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind")) throw std::invalid_argument("scene JSON needs a \"kind\"");
  SceneSpec s;
  try {
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.level = j.value("level", s.level);
    s.low = j.value("low", s.low);
    s.high = j.value("high", s.high);
    s.period = j.value("period", s.period);
    s.min_flux = j.value("min", s.min_flux);
    s.ratio = j.value("ratio", s.ratio);
    s.center_x = j.value("center_x", s.center_x);
    s.center_y = j.value("center_y", s.center_y);
    s.radius = j.value("radius", s.radius);
    s.background = j.value("background", s.background);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scene JSON: ") + e.what());
  }
  return s;
}

std::string scene_spec_to_json(const SceneSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case SceneKind::uniform: j["level"] = s.level; break;
    case SceneKind::gradient:
      j["low"] = s.low;
      j["high"] = s.high;
      break;
    case SceneKind::checkerboard:
    case SceneKind::texture:
      j["low"] = s.low;
      j["high"] = s.high;
      j["period"] = s.period;
      if (s.kind == SceneKind::texture) j["seed"] = s.seed;
      break;
    case SceneKind::hdr_step:
      j["min"] = s.min_flux;
      j["ratio"] = s.ratio;
      break;
    case SceneKind::disk:
      j["level"] = s.level;
      j["background"] = s.background;
      j["center_x"] = s.center_x;
      j["center_y"] = s.center_y;
      j["radius"] = s.radius;
      break;
  }
  return j.dump();
}

FluxMap generate_scene(const SceneSpec& s, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw std::invalid_argument("scene: width and height must be >= 1");
  FluxMap map(width, height);
  switch (s.kind) {
    case SceneKind::uniform:
      require_level(s.level, "level");
      std::fill(map.flux.begin(), map.flux.end(), s.level);
      break;

    case SceneKind::gradient:
      require_level(s.low, "low");
      require_level(s.high, "high");
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double t = width == 1 ? 0.0 : static_cast<double>(x) / static_cast<double>(width - 1);
          map.at(x, y) = s.low + (s.high - s.low) * t;
        }
      break;

    case SceneKind::checkerboard: {
      require_level(s.low, "low");
      require_level(s.high, "high");
      if (s.period < 2 || s.period % 2 != 0)
        throw std::invalid_argument("scene: checkerboard period must be even and >= 2");
      const std::size_t cell = s.period / 2;
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
          map.at(x, y) = ((x / cell + y / cell) % 2 == 0) ? s.low : s.high;
      break;
    }

    case SceneKind::hdr_step: {
      require_level(s.min_flux, "min");
      if (!std::isfinite(s.ratio) || s.ratio < 1.0)
        throw std::invalid_argument("scene: hdr-step ratio must be >= 1");
      if (width < 2) throw std::invalid_argument("scene: hdr-step needs width >= 2");
      const double hi = s.min_flux * s.ratio;
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) map.at(x, y) = x < width / 2 ? s.min_flux : hi;
      break;
    }

    case SceneKind::disk: {
      require_level(s.level, "level");
      require_level(s.background, "background");
      const double cx = s.center_x < 0.0 ? 0.5 * static_cast<double>(width - 1) : s.center_x;
      const double cy = s.center_y < 0.0 ? 0.5 * static_cast<double>(height - 1) : s.center_y;
      if (cx > static_cast<double>(width - 1) || cy > static_cast<double>(height - 1))
        throw std::invalid_argument("scene: disk center outside the image");
      if (!(s.radius > 0.0)) throw std::invalid_argument("scene: disk radius must be > 0");
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          map.at(x, y) = dx * dx + dy * dy <= s.radius * s.radius ? s.level : s.background;
        }
      break;
    }

    case SceneKind::texture: {
      require_level(s.low, "low");
      require_level(s.high, "high");
      if (s.period < 1) throw std::invalid_argument("scene: texture period must be >= 1");
      const std::size_t gw = width / s.period + 2, gh = height / s.period + 2;
      std::vector<double> lattice(gw * gh);
      for (std::size_t i = 0; i < lattice.size(); ++i)
        lattice[i] = uniform_at(s.seed, DrawStream::scene_texture, 0, i);
      const double inv = 1.0 / static_cast<double>(s.period);
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double fx = static_cast<double>(x) * inv, fy = static_cast<double>(y) * inv;
          const auto gx = static_cast<std::size_t>(fx), gy = static_cast<std::size_t>(fy);
          const double tx = fx - static_cast<double>(gx), ty = fy - static_cast<double>(gy);
          const double v00 = lattice[gy * gw + gx], v10 = lattice[gy * gw + gx + 1];
          const double v01 = lattice[(gy + 1) * gw + gx], v11 = lattice[(gy + 1) * gw + gx + 1];
          const double v = (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
          map.at(x, y) = s.low + (s.high - s.low) * v;
        }
      break;
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// SPAD

void simulate_spad_frames(const FluxMap& flux, const SensorConfig& cfg, std::uint64_t seed,
                          std::uint64_t first, std::size_t count, std::span<std::uint8_t> out,
                          unsigned threads) {
  cfg.validate();
  flux.validate();
  if (flux.width != cfg.width || flux.height != cfg.height)
    throw std::invalid_argument("simulate_spad: flux map dimensions do not match sensor");
  const std::size_t width = flux.width, height = flux.height, rb = row_bytes(width);
  const std::size_t fb = height * rb;
  if (out.size() != count * fb) throw std::invalid_argument("simulate_spad: output buffer size mismatch");

  std::vector<double> p(flux.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = expected_detections(flux.flux[i], cfg).p_detect;

  parallel_for_chunks(count, threads, [&](std::size_t f0, std::size_t f1) {
    for (std::size_t f = f0; f < f1; ++f) {
      const std::uint64_t frame = first + f;
      std::uint8_t* dst = out.data() + f * fb;
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t bx = 0; bx < rb; ++bx) {
          std::uint8_t byte = 0;
          const std::size_t x0 = bx * 8;
          const std::size_t n = std::min<std::size_t>(8, width - x0);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pix = y * width + x0 + i;
            const double pi = p[pix];
            bool bit;
            if (pi <= 0.0) {
              bit = false;
            } else if (pi >= 1.0) {
              bit = true;
            } else {
              bit = uniform_at(seed, DrawStream::spad_detection, frame, pix) < pi;
            }
            if (bit) byte |= static_cast<std::uint8_t>(0x80u >> i);
          }
          dst[y * rb + bx] = byte;
        }
      }
    }
  });
}

BitplaneStream simulate_spad(const FluxMap& flux, const SensorConfig& cfg, std::uint32_t n_frames,
                             std::uint64_t seed, unsigned threads) {
  if (n_frames == 0) throw std::invalid_argument("simulate_spad: frame count must be >= 1");
  BitplaneStream s;
  s.header = {cfg.width, cfg.height, n_frames, cfg.tau_bin, cfg.eta, cfg.dark_rate, seed};
  s.header.validate();
  s.payload.resize(s.header.payload_bytes());
  simulate_spad_frames(flux, cfg, seed, 0, n_frames, s.payload, threads);
  return s;
}

// ---------------------------------------------------------------------------
// Conventional camera

void ConventionalCameraConfig::validate() const {
  if (!(eta_c > 0.0 && eta_c <= 1.0)) throw std::invalid_argument("eta_c must be in (0, 1]");
  if (!(full_well > 0.0) || !std::isfinite(full_well)) throw std::invalid_argument("full_well must be > 0");
  if (!(read_noise >= 0.0) || !std::isfinite(read_noise)) throw std::invalid_argument("read_noise must be >= 0");
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit_depth must be in [1, 16]");
}

IntensityImage simulate_conventional(const FluxMap& flux, const ConventionalCameraConfig& ccfg,
                                     double exposure, std::uint64_t seed, double optics_scale,
                                     unsigned threads) {
  ccfg.validate();
  flux.validate();
  if (!(exposure > 0.0) || !std::isfinite(exposure))
    throw std::invalid_argument("simulate_conventional: exposure must be > 0");
  if (!(optics_scale >= 0.0) || !std::isfinite(optics_scale))
    throw std::invalid_argument("simulate_conventional: optics_scale must be >= 0");

  IntensityImage img(flux.width, flux.height, ccfg.bit_depth);
  const double top = static_cast<double>(img.max_value());
  parallel_for_chunks(flux.size(), threads, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double mean = flux.flux[i] * ccfg.eta_c * exposure * optics_scale;
      CounterRng shot(seed, DrawStream::conventional_shot, 0, i);
      double electrons = static_cast<double>(shot.poisson(mean));
      if (ccfg.read_noise > 0.0) {
        CounterRng read(seed, DrawStream::conventional_read, 0, i);
        electrons += ccfg.read_noise * read.normal();
      }
      electrons = std::clamp(electrons, 0.0, ccfg.full_well);
      img.samples[i] = static_cast<std::uint16_t>(std::min(top, std::floor(electrons * top / ccfg.full_well)));
    }
  });
  return img;
}

}  // namespace spad
