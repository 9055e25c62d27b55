#pragma once

// Scale-normalized Laplacian-of-Gaussian region detection and the
// largest-region bounding box used for visual servoing.

#include <span>
#include <vector>

#include <json.hpp>

#include "dronerf/geometry.hpp"
#include "dronerf/image.hpp"

namespace dronerf {

using ResponseMap = Image<double, 1>;

struct Kernel2D {
  int radius = 0;
  std::vector<double> values;  // (2 radius + 1)^2, row-major, offset (0,0) at the center

  int size() const { return 2 * radius + 1; }
  double at(int dx, int dy) const { return values[(dy + radius) * size() + (dx + radius)]; }
};

// (1 / (pi sigma^4)) (1 - r^2 / 2 sigma^2) exp(-r^2 / 2 sigma^2) sampled at
// integer offsets. Positive at the center, so bright-on-dark blobs are maxima.
Kernel2D log_kernel(double sigma, int radius);
int default_log_radius(double sigma);

// Convolution with the sigma^2-normalized kernel, shifted to zero sum so flat
// regions respond with 0. Reflect padding at the borders.
ResponseMap norm_log_response(const GrayImage& img, double sigma);

namespace reference {
// Direct 2D convolution with the explicit kernel; serial.
ResponseMap norm_log_response(const GrayImage& img, double sigma);
}  // namespace reference

struct ScaleSpaceBlob {
  double x = 0.0;  // column index of the maximum
  double y = 0.0;  // row index
  double sigma = 0.0;
  double response = 0.0;
  bool near_border = false;  // its 3 sigma window leaves the image
};

struct BlobOptions {
  double threshold = 0.01;
  // Drop weaker maxima whose center lies within sqrt(2) sigma of a stronger one.
  bool prune_overlaps = true;
};

// Geometric sigma ladder [min_sigma, max_sigma] with `per_octave` levels per
// doubling.
std::vector<double> geometric_sigmas(double min_sigma, double max_sigma, int per_octave = 8);
std::vector<double> default_sigmas(int width, int height);

// Joint space-scale local maxima, one point per plateau; sorted by descending sigma, then response.
std::vector<ScaleSpaceBlob> detect_blobs(const GrayImage& img, std::span<const double> sigmas,
                                         const BlobOptions& options = {});

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  Vec2 centroid() const { return Vec2(x + 0.5 * w, y + 0.5 * h); }
  bool contains(const Vec2& p) const { return p.x() >= x && p.x() <= x + w && p.y() >= y && p.y() <= y + h; }
};

// Box of the connected bright region around the largest-scale blob.
BoundingBox largest_region_bbox(const GrayImage& img, std::span<const ScaleSpaceBlob> blobs);

// detect_blobs + largest_region_bbox; nullopt when no blob passes.
std::optional<BoundingBox> find_object_box(const GrayImage& img, std::span<const double> sigmas,
                                           const BlobOptions& options = {});

void to_json(nlohmann::json& j, const ScaleSpaceBlob& b);
void to_json(nlohmann::json& j, const BoundingBox& b);

}  // namespace dronerf
