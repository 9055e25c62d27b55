#include <algorithm>
#include <iterator>

#include "dronerf/geometry.hpp"

namespace dronerf {

namespace {
// |n . v| below this counts as edge-on, which is treated as not visible.
constexpr double kEdgeOnTolerance = 1e-6;

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<int> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

// Front-facing, in frame, and the first hit along the ray to its centroid.
template <typename NearestFn>
bool triangle_visible(const TriangleMesh& mesh, const CameraRig& rig, int t, NearestFn&& nearest) {
  const Vec3& c = mesh.centroid(t);
  const auto pixel = rig.project(c);
  if (!pixel || !rig.in_image(*pixel)) return false;
  const Vec3 to_centroid = c - rig.position();
  const double dist = to_centroid.norm();
  const Vec3 dir = to_centroid / dist;
  if (mesh.normal(t).dot(dir) > -kEdgeOnTolerance) return false;
  const auto hit = nearest(Ray{rig.position(), dir}, dist * (1.0 - 1e-7));
  return !hit || hit->triangle == t;
}

std::vector<int> flagged(const std::vector<char>& flags) {
  std::vector<int> out;
  for (int t = 0; t < static_cast<int>(flags.size()); ++t) {
    if (flags[t]) out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<int> visible_triangles(const TriangleMesh& mesh, const CameraRig& rig) {
  const int n = mesh.triangle_count();
  std::vector<char> flags(n, 0);
  const auto nearest = [&](const Ray& r, double max_distance) { return mesh.intersect(r, max_distance); };
#pragma omp parallel for schedule(static)
  for (int t = 0; t < n; ++t) flags[t] = triangle_visible(mesh, rig, t, nearest);
  return flagged(flags);
}

namespace reference {

std::vector<int> visible_triangles(const TriangleMesh& mesh, const CameraRig& rig) {
  const int n = mesh.triangle_count();
  std::vector<char> flags(n, 0);
  const auto nearest = [&](const Ray& r, double max_distance) {
    std::optional<MeshHit> best;
    for (int t = 0; t < n; ++t) {
      if (auto d = ray_triangle_hit(r.origin, r.direction, mesh.corners(t));
          d && *d < max_distance && (!best || *d < best->distance)) {
        best = MeshHit{*d, t};
      }
    }
    return best;
  };
  for (int t = 0; t < n; ++t) flags[t] = triangle_visible(mesh, rig, t, nearest);
  return flagged(flags);
}

}  // namespace reference

VisibilityReport coverage_report(const TriangleMesh& mesh, std::span<const CameraRig> rigs) {
  VisibilityReport report;
  const double total = mesh.triangle_count();
  std::vector<char> seen(mesh.triangle_count(), 0);
  for (const auto& rig : rigs) {
    auto vis = visible_triangles(mesh, rig);
    for (int t : vis) seen[t] = 1;
    report.fractions.push_back(vis.size() / total);
    report.visible.push_back(std::move(vis));
  }
  report.union_fraction = std::count(seen.begin(), seen.end(), 1) / total;
  const size_t k = rigs.size();
  report.overlap.assign(k, std::vector<double>(k, 1.0));
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      report.overlap[i][j] = report.overlap[j][i] = jaccard(report.visible[i], report.visible[j]);
    }
  }
  return report;
}

}  // namespace dronerf
