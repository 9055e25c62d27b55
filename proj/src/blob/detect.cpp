#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "dronerf/blob.hpp"
#include "dronerf/errors.hpp"

namespace dronerf {

std::vector<double> geometric_sigmas(double min_sigma, double max_sigma, int per_octave) {
  if (!(min_sigma > 0.0) || !(max_sigma > min_sigma) || per_octave < 1) {
    throw std::invalid_argument("invalid sigma ladder");
  }
  std::vector<double> out;
  const double step = std::pow(2.0, 1.0 / per_octave);
  for (int i = 0;; ++i) {
    const double s = min_sigma * std::pow(step, i);
    if (s > max_sigma * (1.0 + 1e-12)) break;
    out.push_back(s);
  }
  return out;
}

std::vector<double> default_sigmas(int width, int height) {
  return geometric_sigmas(1.0, std::min(width, height) / 4.0, 8);
}

std::vector<ScaleSpaceBlob> detect_blobs(const GrayImage& img, std::span<const double> sigmas,
                                         const BlobOptions& options) {
  if (sigmas.size() < 3) throw std::invalid_argument("detect_blobs needs at least 3 sigma levels");
  for (size_t i = 1; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > sigmas[i - 1])) throw std::invalid_argument("sigmas must be strictly ascending");
  }
  const int w = img.width();
  const int h = img.height();
  const int levels = static_cast<int>(sigmas.size());
  std::vector<ResponseMap> stack(levels);
  for (int s = 0; s < levels; ++s) stack[s] = norm_log_response(img, sigmas[s]);

  std::vector<ScaleSpaceBlob> found;
  for (int s = 1; s + 1 < levels; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = stack[s](x, y);
        if (!(v > options.threshold)) continue;
        bool is_max = true;
        for (int ds = -1; ds <= 1 && is_max; ++ds) {
          for (int dy = -1; dy <= 1 && is_max; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (ds == 0 && dy == 0 && dx == 0) continue;
              const int nx = x + dx;
              const int ny = y + dy;
              if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
              // Plateaus keep their last point in (scale, row, column) order.
              const bool earlier = ds < 0 || (ds == 0 && (dy < 0 || (dy == 0 && dx < 0)));
              const double u = stack[s + ds](nx, ny);
              if (earlier ? !(v >= u) : !(v > u)) {
                is_max = false;
                break;
              }
            }
          }
        }
        if (!is_max) continue;
        const double reach = 3.0 * sigmas[s];
        const bool near_border = x - reach < 0 || y - reach < 0 || x + reach > w - 1 || y + reach > h - 1;
        found.push_back({static_cast<double>(x), static_cast<double>(y), sigmas[s], v, near_border});
      }
    }
  }

  if (options.prune_overlaps) {
    std::stable_sort(found.begin(), found.end(),
                     [](const ScaleSpaceBlob& a, const ScaleSpaceBlob& b) { return a.response > b.response; });
    std::vector<ScaleSpaceBlob> kept;
    for (const auto& b : found) {
      const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const ScaleSpaceBlob& k) {
        return std::hypot(k.x - b.x, k.y - b.y) < std::sqrt(2.0) * std::max(k.sigma, b.sigma);
      });
      if (!overlaps) kept.push_back(b);
    }
    found = std::move(kept);
  }
  std::stable_sort(found.begin(), found.end(), [](const ScaleSpaceBlob& a, const ScaleSpaceBlob& b) {
    if (a.sigma != b.sigma) return a.sigma > b.sigma;
    return a.response > b.response;
  });
  return found;
}

BoundingBox largest_region_bbox(const GrayImage& img, std::span<const ScaleSpaceBlob> blobs) {
  if (blobs.empty()) throw NoRegionError("no region found");
  const ScaleSpaceBlob* best = &blobs[0];
  for (const auto& b : blobs) {
    if (b.sigma > best->sigma || (b.sigma == best->sigma && b.response > best->response)) best = &b;
  }
  const int w = img.width();
  const int h = img.height();
  const int cx = std::clamp(static_cast<int>(std::lround(best->x)), 0, w - 1);
  const int cy = std::clamp(static_cast<int>(std::lround(best->y)), 0, h - 1);
  const int half = static_cast<int>(std::ceil(3.0 * best->sigma));
  const int x0 = std::max(0, cx - half);
  const int x1 = std::min(w - 1, cx + half);
  const int y0 = std::max(0, cy - half);
  const int y1 = std::min(h - 1, cy + half);

  float lo = img(cx, cy);
  float hi = lo;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      lo = std::min(lo, img(x, y));
      hi = std::max(hi, img(x, y));
    }
  }
  const float threshold = lo + 0.5f * (hi - lo);
  auto in_mask = [&](int x, int y) { return img(x, y) >= threshold; };

  // Seed: the blob center, or the nearest in-mask pixel of the window.
  int sx = cx;
  int sy = cy;
  if (!in_mask(sx, sy)) {
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (in_mask(x, y) && d < best_d) {
          best_d = d;
          sx = x;
          sy = y;
        }
      }
    }
  }

  std::vector<char> visited(img.pixel_count(), 0);
  std::queue<std::pair<int, int>> open;
  open.emplace(sx, sy);
  visited[static_cast<size_t>(sy) * w + sx] = 1;
  int min_x = sx, max_x = sx, min_y = sy, max_y = sy;
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  while (!open.empty()) {
    const auto [x, y] = open.front();
    open.pop();
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      char& seen = visited[static_cast<size_t>(ny) * w + nx];
      if (seen || !in_mask(nx, ny)) continue;
      seen = 1;
      open.emplace(nx, ny);
    }
  }
  return BoundingBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

std::optional<BoundingBox> find_object_box(const GrayImage& img, std::span<const double> sigmas,
                                           const BlobOptions& options) {
  const auto blobs = detect_blobs(img, sigmas, options);
  if (blobs.empty()) return std::nullopt;
  return largest_region_bbox(img, blobs);
}

void to_json(nlohmann::json& j, const ScaleSpaceBlob& b) {
  j = {{"x", b.x}, {"y", b.y}, {"sigma", b.sigma}, {"response", b.response}, {"near_border", b.near_border}};
}

void to_json(nlohmann::json& j, const BoundingBox& b) {
  const Vec2 c = b.centroid();
  j = {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"centroid", {c.x(), c.y()}}};
}

}  // namespace dronerf
