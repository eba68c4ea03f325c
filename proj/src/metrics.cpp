#include "spad/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "spad/image_io.hpp"

namespace spad {

namespace {

void require_nonempty(const IntensityImage& img) {
  img.validate();
  if (img.samples.empty()) throw std::invalid_argument("metric of an empty image");
}

std::vector<std::uint64_t> histogram(const IntensityImage& img) {
  std::vector<std::uint64_t> h(std::size_t{1} << img.bit_depth, 0);
  for (auto s : img.samples) ++h[s];
  return h;
}

}  // namespace

double rms_contrast(const IntensityImage& img) {
  require_nonempty(img);
  // Computed from the histogram so the value depends only on the gray-level
  // distribution, not on pixel order.
  const auto h = histogram(img);
  const double n = static_cast<double>(img.samples.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) sum += static_cast<double>(h[k]) * static_cast<double>(k);
  const double mean = sum / n;
  double var = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k] == 0) continue;
    const double d = static_cast<double>(k) - mean;
    var += static_cast<double>(h[k]) * d * d;
  }
  return std::sqrt(var / n) / static_cast<double>(img.max_value());
}

double entropy(const IntensityImage& img) {
  require_nonempty(img);
  const auto h = histogram(img);
  const double n = static_cast<double>(img.samples.size());
  double bits = 0.0;
  for (auto c : h) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    bits -= p * std::log2(p);
  }
  return std::max(0.0, bits);
}

double sharpness(const IntensityImage& img) {
  img.validate();
  if (img.width < 3 || img.height < 3) throw std::invalid_argument("sharpness: image smaller than 3x3 kernel");
  // Integer responses and exact 128-bit moments; normalization is applied last.
  __int128 sum = 0, sum_sq = 0;
  std::int64_t count = 0;
  for (std::size_t y = 1; y + 1 < img.height; ++y) {
    for (std::size_t x = 1; x + 1 < img.width; ++x) {
      const std::int64_t r = std::int64_t{img.at(x, y - 1)} + img.at(x, y + 1) + img.at(x - 1, y) +
                             img.at(x + 1, y) - 4 * std::int64_t{img.at(x, y)};
      sum += r;
      sum_sq += static_cast<__int128>(r) * r;
      ++count;
    }
  }
  const __int128 numer = static_cast<__int128>(count) * sum_sq - sum * sum;
  const double maxv = static_cast<double>(img.max_value());
  const double n = static_cast<double>(count);
  return static_cast<double>(numer) / (n * n) / (maxv * maxv);
}

// ---------------------------------------------------------------------------
// SSIM family

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable Gaussian filter, valid region only.
GrayImage filter_valid(const GrayImage& in) {
  static const auto taps = gaussian_taps();
  const std::size_t ow = in.width - kWindow + 1, oh = in.height - kWindow + 1;
  GrayImage tmp(ow, in.height);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * in.at(x + static_cast<std::size_t>(k), y);
      tmp.at(x, y) = acc;
    }
  GrayImage out(ow, oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * tmp.at(x, y + static_cast<std::size_t>(k));
      out.at(x, y) = acc;
    }
  return out;
}

GrayImage elementwise_product(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.pixels.size(); ++i) out.pixels[i] = a.pixels[i] * b.pixels[i];
  return out;
}

GrayImage downsample2(const GrayImage& in) {
  GrayImage out(in.width / 2, in.height / 2);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      out.at(x, y) = 0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                             in.at(2 * x + 1, 2 * y + 1));
  return out;
}

struct SsimMeans {
  double ssim;  // mean of l * cs
  double cs;    // mean of cs
};

SsimMeans ssim_means(const GrayImage& x, const GrayImage& y) {
  const GrayImage mu_x = filter_valid(x), mu_y = filter_valid(y);
  const GrayImage xx = filter_valid(elementwise_product(x, x));
  const GrayImage yy = filter_valid(elementwise_product(y, y));
  const GrayImage xy = filter_valid(elementwise_product(x, y));
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < mu_x.pixels.size(); ++i) {
    const double mx = mu_x.pixels[i], my = mu_y.pixels[i];
    const double vx = xx.pixels[i] - mx * mx;
    const double vy = yy.pixels[i] - my * my;
    const double cov = xy.pixels[i] - mx * my;
    const double l = (2.0 * mx * my + kC1) / (mx * mx + my * my + kC1);
    const double cs = (2.0 * cov + kC2) / (vx + vy + kC2);
    ssim_sum += l * cs;
    cs_sum += cs;
  }
  const double n = static_cast<double>(mu_x.pixels.size());
  return {ssim_sum / n, cs_sum / n};
}

void check_pair(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size())
    throw std::invalid_argument("image dimensions differ");
  if (a.pixels.empty()) throw std::invalid_argument("empty image");
}

}  // namespace

double ssim(const GrayImage& test, const GrayImage& reference) {
  check_pair(test, reference);
  if (test.width < kWindow || test.height < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  return ssim_means(test, reference).ssim;
}

MsSsimResult ms_ssim_detailed(const GrayImage& test, const GrayImage& reference) {
  check_pair(test, reference);
  std::size_t side = std::min(test.width, test.height);
  if (side < kWindow) throw std::invalid_argument("ms_ssim: image smaller than the 11x11 window");
  int scales = 1;
  while (scales < 5 && (side / 2) >= static_cast<std::size_t>(kWindow)) {
    side /= 2;
    ++scales;
  }
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kScaleWeights[static_cast<std::size_t>(s)];

  GrayImage x = test, y = reference;
  double value = 1.0;
  for (int s = 0; s < scales; ++s) {
    const SsimMeans m = ssim_means(x, y);
    const double w = kScaleWeights[static_cast<std::size_t>(s)] / weight_sum;
    const double term = s + 1 == scales ? m.ssim : m.cs;
    value *= std::pow(std::max(0.0, term), w);
    if (s + 1 < scales) {
      x = downsample2(x);
      y = downsample2(y);
    }
  }
  return {std::clamp(value, 0.0, 1.0), scales};
}

double ms_ssim(const GrayImage& test, const GrayImage& reference) {
  return ms_ssim_detailed(test, reference).value;
}

double ms_ssim(const IntensityImage& test, const IntensityImage& reference) {
  return ms_ssim(test.normalized(), reference.normalized());
}

double psnr(const GrayImage& test, const GrayImage& reference) {
  check_pair(test, reference);
  double se = 0.0;
  for (std::size_t i = 0; i < test.pixels.size(); ++i) {
    const double d = test.pixels[i] - reference.pixels[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(test.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const IntensityImage& test, const IntensityImage& reference) {
  return psnr(test.normalized(), reference.normalized());
}

// ---------------------------------------------------------------------------
// Reports

MetricsReport make_report(const IntensityImage& img, const IntensityImage* reference,
                          Provenance provenance) {
  MetricsReport r;
  r.width = img.width;
  r.height = img.height;
  r.bit_depth = img.bit_depth;
  r.contrast = rms_contrast(img);
  r.entropy_bits = entropy(img);
  r.sharpness = sharpness(img);
  if (reference) {
    const auto ms = ms_ssim_detailed(img.normalized(), reference->normalized());
    r.ms_ssim = ms.value;
    r.ms_ssim_scales = ms.scales;
    r.psnr_db = psnr(img, *reference);
  }
  r.provenance = std::move(provenance);
  return r;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson report_object(const MetricsReport& r) {
  ojson j;
  j["schema"] = kMetricsSchema;
  j["source"] = r.provenance.source;
  j["width"] = r.width;
  j["height"] = r.height;
  j["bit_depth"] = r.bit_depth;
  j["contrast"] = r.contrast;
  j["entropy_bits"] = r.entropy_bits;
  j["sharpness"] = r.sharpness;
  j["ms_ssim"] = r.ms_ssim ? ojson(*r.ms_ssim) : ojson(nullptr);
  j["ms_ssim_scales"] = r.ms_ssim_scales ? ojson(*r.ms_ssim_scales) : ojson(nullptr);
  if (!r.psnr_db) {
    j["psnr_db"] = nullptr;
  } else if (std::isinf(*r.psnr_db)) {
    j["psnr_db"] = "inf";
  } else {
    j["psnr_db"] = *r.psnr_db;
  }
  j["exposure_s"] = r.provenance.exposure_s ? ojson(*r.provenance.exposure_s) : ojson(nullptr);
  j["configuration"] = r.provenance.configuration;
  return j;
}

MetricsReport report_from_object(const ojson& j) {
  MetricsReport r;
  r.provenance.source = j.at("source").get<std::string>();
  r.width = j.at("width").get<std::size_t>();
  r.height = j.at("height").get<std::size_t>();
  r.bit_depth = j.at("bit_depth").get<int>();
  r.contrast = j.at("contrast").get<double>();
  r.entropy_bits = j.at("entropy_bits").get<double>();
  r.sharpness = j.at("sharpness").get<double>();
  if (!j.at("ms_ssim").is_null()) r.ms_ssim = j.at("ms_ssim").get<double>();
  if (!j.at("ms_ssim_scales").is_null()) r.ms_ssim_scales = j.at("ms_ssim_scales").get<int>();
  const auto& p = j.at("psnr_db");
  if (p.is_string() && p.get<std::string>() == "inf") {
    r.psnr_db = std::numeric_limits<double>::infinity();
  } else if (!p.is_null()) {
    r.psnr_db = p.get<double>();
  }
  if (!j.at("exposure_s").is_null()) r.provenance.exposure_s = j.at("exposure_s").get<double>();
  r.provenance.configuration = j.at("configuration").get<std::string>();
  return r;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) { return report_object(report).dump(); }

MetricsReport report_from_json(const std::string& json_text) {
  try {
    return report_from_object(ojson::parse(json_text));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("metrics report JSON: ") + e.what());
  }
}

std::vector<BatchEntry> report_batch(const std::vector<std::filesystem::path>& files,
                                     const std::optional<std::filesystem::path>& reference,
                                     const std::string& configuration,
                                     std::optional<double> exposure_s) {
  std::optional<IntensityImage> ref;
  if (reference) ref = read_pgm(*reference);
  std::vector<BatchEntry> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    BatchEntry e;
    e.source = f.string();
    try {
      const IntensityImage img = read_pgm(f);
      e.report = make_report(img, ref ? &*ref : nullptr, {e.source, exposure_s, configuration});
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string batch_to_json(const std::vector<BatchEntry>& entries) {
  ojson j;
  j["schema"] = kMetricsSchema;
  ojson arr = ojson::array();
  for (const auto& e : entries) {
    if (e.report) {
      arr.push_back(report_object(*e.report));
    } else {
      ojson err;
      err["source"] = e.source;
      err["error"] = e.error;
      arr.push_back(err);
    }
  }
  j["reports"] = arr;
  return j.dump(2);
}

}  // namespace spad
