#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dronerf/blob.hpp"

namespace dronerf {

namespace {

// Half-sample symmetric reflection: d c b a | a b c d | d c b a.
int reflect(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_taps(double sigma, int radius) {
  std::vector<double> g(2 * radius + 1);
  for (int t = -radius; t <= radius; ++t) g[t + radius] = std::exp(-(t * t) / (2.0 * sigma * sigma));
  return g;
}

// out(x, y) = sum_t taps[t] * in(x + t, y) along rows (axis 0) or columns.
void convolve_1d(const std::vector<double>& in, std::vector<double>& out, int w, int h,
                 const std::vector<double>& taps, int axis) {
  const int r = static_cast<int>(taps.size()) / 2;
  const int n = axis == 0 ? w : h;
  const int lines = axis == 0 ? h : w;
#pragma omp parallel
  {
    std::vector<double> padded(n + 2 * r);
#pragma omp for schedule(static)
    for (int line = 0; line < lines; ++line) {
      for (int i = -r; i < n + r; ++i) {
        const int src = reflect(i, n);
        padded[i + r] = axis == 0 ? in[static_cast<size_t>(line) * w + src] : in[static_cast<size_t>(src) * w + line];
      }
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* p = padded.data() + i;
        for (size_t t = 0; t < taps.size(); ++t) acc += taps[t] * p[t];
        if (axis == 0) {
          out[static_cast<size_t>(line) * w + i] = acc;
        } else {
          out[static_cast<size_t>(i) * w + line] = acc;
        }
      }
    }
  }
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
}

}  // namespace

int default_log_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

Kernel2D log_kernel(double sigma, int radius) {
  check_sigma(sigma);
  if (radius < default_log_radius(sigma)) throw std::invalid_argument("kernel radius must be at least ceil(3 sigma)");
  Kernel2D k;
  k.radius = radius;
  k.values.resize(static_cast<size_t>(k.size()) * k.size());
  const double s2 = sigma * sigma;
  const double scale = 1.0 / (std::numbers::pi * s2 * s2);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double q = (dx * dx + dy * dy) / (2.0 * s2);
      k.values[(dy + radius) * k.size() + (dx + radius)] = scale * (1.0 - q) * std::exp(-q);
    }
  }
  return k;
}

// The normalized kernel splits exactly into two separable terms:
//   (1 - (x^2+y^2)/2s^2) g(x) g(y) = h(x) g(y) + g(x) h(y),  h(t) = (1/2 - t^2/2s^2) g(t)
// and the zero-sum shift is a constant, i.e. a separable box filter.
ResponseMap norm_log_response(const GrayImage& img, double sigma) {
  check_sigma(sigma);
  const int w = img.width();
  const int h = img.height();
  const int r = default_log_radius(sigma);
  const double s2 = sigma * sigma;

  const std::vector<double> g = gaussian_taps(sigma, r);
  std::vector<double> hh(g.size());
  for (int t = -r; t <= r; ++t) hh[t + r] = (0.5 - (t * t) / (2.0 * s2)) * g[t + r];
  const std::vector<double> box(g.size(), 1.0);

  double sum_g = 0.0;
  double sum_h = 0.0;
  for (size_t i = 0; i < g.size(); ++i) {
    sum_g += g[i];
    sum_h += hh[i];
  }
  const double prefactor = 1.0 / (std::numbers::pi * s2);
  const double side = static_cast<double>(g.size());
  const double mean = prefactor * 2.0 * sum_g * sum_h / (side * side);

  const size_t n = img.pixel_count();
  std::vector<double> src(img.data().begin(), img.data().end());
  std::vector<double> tmp(n);
  std::vector<double> a(n);
  std::vector<double> b(n);
  std::vector<double> c(n);
  convolve_1d(src, tmp, w, h, hh, 0);
  convolve_1d(tmp, a, w, h, g, 1);
  convolve_1d(src, tmp, w, h, g, 0);
  convolve_1d(tmp, b, w, h, hh, 1);
  convolve_1d(src, tmp, w, h, box, 0);
  convolve_1d(tmp, c, w, h, box, 1);

  ResponseMap out(w, h);
  auto px = out.data();
  for (size_t i = 0; i < n; ++i) px[i] = prefactor * (a[i] + b[i]) - mean * c[i];
  return out;
}

namespace reference {

ResponseMap norm_log_response(const GrayImage& img, double sigma) {
  const int r = default_log_radius(sigma);
  Kernel2D k = log_kernel(sigma, r);
  double sum = 0.0;
  for (double& v : k.values) {
    v *= sigma * sigma;
    sum += v;
  }
  const double mean = sum / static_cast<double>(k.values.size());
  for (double& v : k.values) v -= mean;

  const int w = img.width();
  const int h = img.height();
  ResponseMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) acc += k.at(dx, dy) * img(reflect(x + dx, w), reflect(y + dy, h));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace reference

}  // namespace dronerf
