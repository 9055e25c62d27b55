#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "dronerf/errors.hpp"
#include "dronerf/placement.hpp"

namespace dronerf {

namespace {

// a . p >= b
struct HalfSpace {
  Vec3 a;
  double b;
};

// Camera-frame constraint c . p_cam >= d expressed in world coordinates.
HalfSpace to_world(const CameraRig& rig, const Vec3& c, double d) {
  const Vec3 a = rig.world_to_camera().transpose() * c;
  return {a, d + a.dot(rig.position())};
}

std::vector<HalfSpace> wedge(const CameraRig& rig, const BoundingBox& box, double margin, double near) {
  const Intrinsics& k = rig.intrinsics();
  const double u0 = box.x - margin;
  const double u1 = box.x + box.w + margin;
  const double v0 = box.y - margin;
  const double v1 = box.y + box.h + margin;
  // u = fx X / Z + cx >= u0  <=>  fx X + (cx - u0) Z >= 0 for Z > 0, likewise for the other edges.
  return {to_world(rig, Vec3(k.fx, 0.0, k.cx - u0), 0.0), to_world(rig, Vec3(-k.fx, 0.0, u1 - k.cx), 0.0),
          to_world(rig, Vec3(0.0, k.fy, k.cy - v0), 0.0), to_world(rig, Vec3(0.0, -k.fy, v1 - k.cy), 0.0),
          to_world(rig, Vec3(0.0, 0.0, 1.0), near)};
}

}  // namespace

SeedGeometry estimate_seed_geometry(std::span<const SeedView> views, const SeedOptions& options) {
  if (views.empty()) throw std::invalid_argument("seed geometry needs at least one view");
  std::vector<HalfSpace> planes;
  for (size_t i = 0; i < views.size(); ++i) {
    const GrayImage& img = views[i].image;
    const auto sigmas = geometric_sigmas(1.0, std::min(img.width(), img.height()) / 4.0, options.sigmas_per_octave);
    const auto box = find_object_box(img, sigmas, options.blobs);
    if (!box) throw NoRegionError("no region found in seed view " + std::to_string(i));
    const auto w = wedge(views[i].rig, *box, options.margin_px, options.near);
    planes.insert(planes.end(), w.begin(), w.end());
  }

  // Vertices of the intersection polytope: feasible points where three
  // constraint planes meet.
  const double tol = 1e-9;
  Aabb hull;
  const size_t n = planes.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      for (size_t l = j + 1; l < n; ++l) {
        Mat3 m;
        m.row(0) = planes[i].a.transpose();
        m.row(1) = planes[j].a.transpose();
        m.row(2) = planes[l].a.transpose();
        Eigen::FullPivLU<Mat3> lu(m);
        if (!lu.isInvertible()) continue;
        const Vec3 p = lu.solve(Vec3(planes[i].b, planes[j].b, planes[l].b));
        bool feasible = true;
        for (const auto& h : planes) {
          if (h.a.dot(p) < h.b - tol * std::max(1.0, h.a.norm() * p.norm())) {
            feasible = false;
            break;
          }
        }
        if (feasible) hull.extend(p);
      }
    }
  }
  if (!hull.valid() || !(hull.extent().minCoeff() > 0.0)) {
    throw NoRegionError("the view regions do not intersect in a bounded volume");
  }
  return SeedGeometry{{hull}};
}

std::vector<CameraRig> orthogonal_ring(const Intrinsics& intrinsics, const Vec3& center, double radius, double height,
                                       double azimuth0) {
  std::vector<CameraRig> out;
  for (int i = 0; i < 4; ++i) {
    const double az = azimuth0 + i * std::numbers::pi / 2.0;
    const Vec3 eye(center.x() + radius * std::cos(az), center.y() + radius * std::sin(az), height);
    out.push_back(CameraRig::look_at(intrinsics, eye, center));
  }
  return out;
}

}  // namespace dronerf
