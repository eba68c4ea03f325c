#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spad/image.hpp"

namespace spad {

/// Population standard deviation of the normalized [0, 1] view.
double rms_contrast(const IntensityImage& img);

/// Shannon entropy (bits) of the 2^d-bin gray-level histogram.
double entropy(const IntensityImage& img);

/// Variance of the 3x3 Laplacian [[0,1,0],[1,-4,1],[0,1,0]] response on the
/// normalized view, interior pixels only. Needs width, height >= 3.
double sharpness(const IntensityImage& img);

struct MsSsimResult {
  double value = 0.0;
  int scales = 0;
};

/// Multi-scale SSIM: 11x11 Gaussian window (sigma 1.5, valid region),
/// C1 = 0.01^2, C2 = 0.03^2, 2x2-mean dyadic downsampling, scale weights
/// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333). Images too small for five
/// scales use as many as fit (coarsest side >= 11) with renormalized weights.
/// Negative per-scale terms are clamped to 0, so the result lies in [0, 1].
MsSsimResult ms_ssim_detailed(const GrayImage& test, const GrayImage& reference);
double ms_ssim(const GrayImage& test, const GrayImage& reference);
double ms_ssim(const IntensityImage& test, const IntensityImage& reference);

/// Single-scale mean SSIM with the same window and constants.
double ssim(const GrayImage& test, const GrayImage& reference);

/// 10 log10(1 / MSE) on normalized views; +infinity for identical images.
double psnr(const GrayImage& test, const GrayImage& reference);
double psnr(const IntensityImage& test, const IntensityImage& reference);

struct Provenance {
  std::string source;
  std::optional<double> exposure_s;
  std::string configuration;
};

struct MetricsReport {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 8;
  double contrast = 0.0;
  double entropy_bits = 0.0;
  double sharpness = 0.0;
  std::optional<double> ms_ssim;
  std::optional<int> ms_ssim_scales;
  std::optional<double> psnr_db;
  Provenance provenance;
};

inline constexpr const char* kMetricsSchema = "spad-metrics/1";

/// Computes every metric; the reference enables ms_ssim and psnr_db.
MetricsReport make_report(const IntensityImage& img, const IntensityImage* reference,
                          Provenance provenance);

/// One JSON object with a fixed field order. Infinite PSNR is written as the
/// string "inf"; absent optional fields are null.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json_text);

/// Result for one file of a batch: either a report or an error message.
struct BatchEntry {
  std::string source;
  std::optional<MetricsReport> report;
  std::string error;
};

/// Reports every PGM in files; unreadable files become error entries and the
/// batch continues. Throws if the reference itself cannot be read.
std::vector<BatchEntry> report_batch(const std::vector<std::filesystem::path>& files,
                                     const std::optional<std::filesystem::path>& reference,
                                     const std::string& configuration = {},
                                     std::optional<double> exposure_s = std::nullopt);

/// {"schema": ..., "reports": [...]} with error entries as {"source", "error"}.
std::string batch_to_json(const std::vector<BatchEntry>& entries);

}  // namespace spad
