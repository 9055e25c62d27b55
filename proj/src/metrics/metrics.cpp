#include "dronerf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dronerf::metrics {

namespace {

void require_same_size(const RgbImage& a, const RgbImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("image dimensions differ");
  }
}

using Plane = std::vector<double>;

// Valid-mode separable Gaussian filter: output is (w - k + 1) x (h - k + 1).
Plane blur_valid(const Plane& in, int w, int h, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  Plane rows(static_cast<size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * in[static_cast<size_t>(y) * w + x + t];
      rows[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  Plane out(static_cast<size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[static_cast<size_t>(y + t) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const Plane& x, const Plane& y, int w, int h, const std::vector<double>& taps, double c1,
                  double c2) {
  Plane xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const Plane mx = blur_valid(x, w, h, taps);
  const Plane my = blur_valid(y, w, h, taps);
  const Plane sxx = blur_valid(xx, w, h, taps);
  const Plane syy = blur_valid(yy, w, h, taps);
  const Plane sxy = blur_valid(xy, w, h, taps);
  double total = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double mxy = mx[i] * my[i];
    const double mxx = mx[i] * mx[i];
    const double myy = my[i] * my[i];
    const double vx = sxx[i] - mxx;
    const double vy = syy[i] - myy;
    const double cxy = sxy[i] - mxy;
    total += ((2.0 * mxy + c1) * (2.0 * cxy + c2)) / ((mxx + myy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

PsnrResult psnr(const RgbImage& a, const RgbImage& b) {
  require_same_size(a, b);
  double sum = 0.0;
  const auto pa = a.data();
  const auto pb = b.data();
  for (size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pa.size());
  if (mse == 0.0) return {kPsnrCap, true};
  return {std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)), false};
}

double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& options) {
  require_same_size(a, b);
  if (a.width() < options.window || a.height() < options.window) {
    throw std::invalid_argument("image smaller than the SSIM window");
  }
  std::vector<double> taps(options.window);
  const int r = options.window / 2;
  double norm = 0.0;
  for (int t = 0; t < options.window; ++t) {
    taps[t] = std::exp(-((t - r) * (t - r)) / (2.0 * options.sigma * options.sigma));
    norm += taps[t];
  }
  for (double& t : taps) t /= norm;
  const double c1 = options.k1 * options.k1;
  const double c2 = options.k2 * options.k2;

  const int w = a.width();
  const int h = a.height();
  const size_t n = a.pixel_count();
  auto plane = [&](const RgbImage& img, int c) {
    Plane p(n);
    for (size_t i = 0; i < n; ++i) p[i] = img.data()[i * 3 + c];
    return p;
  };
  if (options.grayscale) {
    auto luma = [&](const RgbImage& img) {
      Plane p(n);
      const auto g = to_gray(img);
      for (size_t i = 0; i < n; ++i) p[i] = g.data()[i];
      return p;
    };
    return ssim_plane(luma(a), luma(b), w, h, taps, c1, c2);
  }
  double total = 0.0;
  for (int c = 0; c < 3; ++c) total += ssim_plane(plane(a, c), plane(b, c), w, h, taps, c1, c2);
  return total / 3.0;
}

void MetricReport::add(std::string view, const RgbImage& reference, const RgbImage& rendered,
                       const SsimOptions& options) {
  const PsnrResult p = psnr(reference, rendered);
  views.push_back({std::move(view), p.db, p.identical, ssim(reference, rendered, options)});
  double sp = 0.0;
  double ss = 0.0;
  for (const auto& v : views) {
    sp += v.psnr_db;
    ss += v.ssim;
  }
  mean_psnr = sp / views.size();
  mean_ssim = ss / views.size();
}

void to_json(nlohmann::json& j, const ViewMetric& v) {
  j = {{"view", v.view}, {"psnr_db", v.psnr_db}, {"identical", v.identical}, {"ssim", v.ssim}};
}

void from_json(const nlohmann::json& j, ViewMetric& v) {
  v.view = j.at("view").get<std::string>();
  v.psnr_db = j.at("psnr_db").get<double>();
  v.identical = j.value("identical", false);
  v.ssim = j.at("ssim").get<double>();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"scene", r.scene},
       {"configuration", r.configuration},
       {"protocol", r.protocol},
       {"views", r.views},
       {"mean_psnr", r.mean_psnr},
       {"mean_ssim", r.mean_ssim}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.scene = j.at("scene").get<std::string>();
  r.configuration = j.at("configuration").get<std::string>();
  r.protocol = j.at("protocol").get<std::string>();
  r.views = j.at("views").get<std::vector<ViewMetric>>();
  r.mean_psnr = j.at("mean_psnr").get<double>();
  r.mean_ssim = j.at("mean_ssim").get<double>();
}

double percent_change(double before, double after) {
  if (before == 0.0) return after == 0.0 ? 0.0 : std::copysign(INFINITY, after);
  return (after - before) / std::abs(before) * 100.0;
}

double ComparisonRow::psnr_change_pct() const { return percent_change(psnr_standard, psnr_optimized); }
double ComparisonRow::ssim_change_pct() const { return percent_change(ssim_standard, ssim_optimized); }

ComparisonRow compare_reports(const MetricReport& standard, const MetricReport& optimized) {
  if (standard.scene != optimized.scene) {
    throw std::invalid_argument("cannot compare different scenes: " + standard.scene + " vs " + optimized.scene);
  }
  if (standard.protocol != optimized.protocol) throw std::invalid_argument("cannot compare different protocols");
  return {standard.scene,       standard.protocol,   standard.mean_psnr,
          optimized.mean_psnr, standard.mean_ssim, optimized.mean_ssim};
}

std::string format_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %-14s | %9s %9s %7s | %8s %9s %7s\n", "Scene", "Protocol", "PSNR std",
                "PSNR opt", "change", "SSIM std", "SSIM opt", "change");
  out << line << std::string(95, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-16s %-14s | %9.2f %9.2f %+6.0f%% | %8.2f %9.2f %+6.0f%%\n",
                  r.scene.c_str(), r.protocol.c_str(), r.psnr_standard, r.psnr_optimized, r.psnr_change_pct(),
                  r.ssim_standard, r.ssim_optimized, r.ssim_change_pct());
    out << line;
  }
  return out.str();
}

std::string format_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "scene,protocol,psnr_standard,psnr_optimized,psnr_change_pct,ssim_standard,ssim_optimized,ssim_change_pct\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.4f,%.4f,%.2f,%.4f,%.4f,%.2f\n", r.scene.c_str(), r.protocol.c_str(),
                  r.psnr_standard, r.psnr_optimized, r.psnr_change_pct(), r.ssim_standard, r.ssim_optimized,
                  r.ssim_change_pct());
    out << line;
  }
  return out.str();
}

nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"scene", r.scene},
                   {"protocol", r.protocol},
                   {"psnr", {{"standard", r.psnr_standard}, {"optimized", r.psnr_optimized}, {"change_pct", r.psnr_change_pct()}}},
                   {"ssim", {{"standard", r.ssim_standard}, {"optimized", r.ssim_optimized}, {"change_pct", r.ssim_change_pct()}}}});
  }
  return out;
}

}  // namespace dronerf::metrics
