#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dronerf/image.hpp"

namespace dronerf::metrics {

// PSNR reported for identical images (MSE = 0).
inline constexpr double kPsnrCap = 99.0;

struct PsnrResult {
  double db = 0.0;
  bool identical = false;
};

// 10 log10(1 / MSE) on [0, 1] images; MSE over all pixels and channels.
PsnrResult psnr(const RgbImage& a, const RgbImage& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  bool grayscale = false;  // compare luma instead of averaging per channel
};

// Mean SSIM over all fully contained Gaussian windows (and channels).
double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& options = {});

struct ViewMetric {
  std::string view;
  double psnr_db = 0.0;
  bool identical = false;
  double ssim = 0.0;
};

struct MetricReport {
  std::string scene;
  std::string configuration;  // "standard" | "optimized"
  std::string protocol;       // "novel_views" | "holdout_split"
  std::vector<ViewMetric> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(std::string view, const RgbImage& reference, const RgbImage& rendered,
           const SsimOptions& options = {});
};

void to_json(nlohmann::json& j, const ViewMetric& v);
void from_json(const nlohmann::json& j, ViewMetric& v);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

struct ComparisonRow {
  std::string scene;
  std::string protocol;
  double psnr_standard = 0.0;
  double psnr_optimized = 0.0;
  double ssim_standard = 0.0;
  double ssim_optimized = 0.0;

  double psnr_change_pct() const;
  double ssim_change_pct() const;
};

// Relative change in percent, (after - before) / |before| * 100.
double percent_change(double before, double after);

ComparisonRow compare_reports(const MetricReport& standard, const MetricReport& optimized);

std::string format_table(const std::vector<ComparisonRow>& rows);
std::string format_csv(const std::vector<ComparisonRow>& rows);
nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows);

}  // namespace dronerf::metrics
