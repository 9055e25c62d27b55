#pragma once

// Mesh, pinhole camera, ray casting, visibility and shading.
//
// Conventions used everywhere in the project:
//  * world frame is right-handed with +z up, units in meters;
//  * camera frame is right-handed: +x right, +y down, +z along the optical axis;
//  * CameraRig stores the world-to-camera rotation R, so p_cam = R (p_world - C);
//  * pixel coordinates are continuous, pixel (i, j) covers [i, i+1) x [j, j+1).

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dronerf/image.hpp"

namespace dronerf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool valid() const { return (min.array() < max.array()).all(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double volume() const { return valid() ? extent().prod() : 0.0; }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
  Aabb dilated(double fraction) const;
};

// Entry/exit parameters of a ray against a box, plus the outward normal of
// the entry face. Returns nullopt if the ray misses or the box is behind.
struct BoxHit {
  double t_enter;
  double t_exit;
  Vec3 entry_normal;
};
std::optional<BoxHit> intersect_box(const Ray& ray, const Aabb& box);

struct MeshHit {
  double distance;
  int triangle;
};

class TriangleMesh {
 public:
  // Albedo is per triangle; an empty list means the documented default
  // mid-gray (0.5, 0.5, 0.5).
  TriangleMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
               std::vector<Vec3> albedo = {});
  ~TriangleMesh();
  TriangleMesh(const TriangleMesh&);
  TriangleMesh& operator=(const TriangleMesh&);
  TriangleMesh(TriangleMesh&&) noexcept;
  TriangleMesh& operator=(TriangleMesh&&) noexcept;

  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }

  std::span<const Vec3> vertices() const { return vertices_; }
  std::span<const std::array<int, 3>> triangles() const { return triangles_; }
  const Vec3& normal(int t) const { return normals_[t]; }
  const Vec3& centroid(int t) const { return centroids_[t]; }
  const Vec3& albedo(int t) const { return albedo_[t]; }
  std::array<Vec3, 3> corners(int t) const {
    const auto& f = triangles_[t];
    return {vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]};
  }
  const Aabb& bounds() const { return bounds_; }

  // Nearest hit along the ray with distance in (eps, max_distance).
  std::optional<MeshHit> intersect(const Ray& ray,
                                   double max_distance = std::numeric_limits<double>::infinity()) const;

 private:
  struct Bvh;

  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Vec3> normals_;
  std::vector<Vec3> centroids_;
  std::vector<Vec3> albedo_;
  Aabb bounds_;
  std::shared_ptr<const Bvh> bvh_;
};

// Text format, one record per line:
//   v x y z        vertex
//   a r g b        albedo applied to the faces that follow (default 0.5 gray)
//   f i j k        triangle, 1-based vertex indices, counter-clockwise seen
//                  from outside
//   # ...          comment
TriangleMesh parse_mesh(std::string_view text);
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

struct Intrinsics {
  double fx = 110.0;
  double fy = 110.0;
  double cx = 64.0;
  double cy = 64.0;
  int width = 128;
  int height = 128;

  // Same field of view at a different resolution.
  Intrinsics scaled(double factor) const;
  void validate() const;
};

class CameraRig {
 public:
  CameraRig(const Intrinsics& intrinsics, const Vec3& position, const Mat3& world_to_camera);

  // Optical axis through `target`, image x axis kept horizontal (z-up world).
  static CameraRig look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target);
  // Heading `yaw` (radians, CCW from +x) and downward tilt `tilt`.
  static CameraRig from_yaw_tilt(const Intrinsics& intrinsics, const Vec3& eye, double yaw,
                                 double tilt);
  static CameraRig from_camera_to_world(const Intrinsics& intrinsics, const Mat4& camera_to_world);

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const Vec3& position() const { return position_; }
  const Mat3& world_to_camera() const { return rotation_; }
  Vec3 forward() const { return rotation_.row(2).transpose(); }
  Mat4 camera_to_world() const;

  Vec3 to_camera(const Vec3& world) const { return rotation_ * (world - position_); }
  Vec3 to_world(const Vec3& cam) const { return rotation_.transpose() * cam + position_; }

  // Pinhole projection; nullopt when the camera-frame depth is not positive.
  std::optional<Vec2> project(const Vec3& world) const;
  // Inverse of project for a known camera-frame depth.
  Vec3 back_project(const Vec2& pixel, double depth) const;
  // Unit ray through continuous pixel coordinate (u, v).
  Ray pixel_ray(double u, double v) const;
  bool in_image(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() < intrinsics_.width && pixel.y() >= 0.0 &&
           pixel.y() < intrinsics_.height;
  }

 private:
  Intrinsics intrinsics_;
  Vec3 position_;
  Mat3 rotation_;
};

inline std::optional<Vec2> project_point(const CameraRig& rig, const Vec3& p) { return rig.project(p); }

// Moller-Trumbore test. Edges count as hits; returns the positive distance.
std::optional<double> ray_triangle_hit(const Vec3& origin, const Vec3& direction,
                                       const std::array<Vec3, 3>& tri);

// Centroid-based visibility: in frame, front-facing, unoccluded.
std::vector<int> visible_triangles(const TriangleMesh& mesh, const CameraRig& rig);

namespace reference {
// Serial, brute-force occlusion test against every triangle.
std::vector<int> visible_triangles(const TriangleMesh& mesh, const CameraRig& rig);
}  // namespace reference

struct VisibilityReport {
  std::vector<std::vector<int>> visible;  // sorted triangle ids per rig
  std::vector<double> fractions;          // per rig
  double union_fraction = 0.0;
  std::vector<std::vector<double>> overlap;  // Jaccard, symmetric, unit diagonal
};
VisibilityReport coverage_report(const TriangleMesh& mesh, std::span<const CameraRig> rigs);

struct Lighting {
  Vec3 to_light = Vec3(0.3, -0.4, 1.0).normalized();
  double ambient = 0.6;

  double shade(const Vec3& normal) const {
    return ambient + (1.0 - ambient) * std::max(0.0, normal.dot(to_light));
  }
};

GrayImage render_shaded(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light = {});
RgbImage render_rgb(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light = {});

namespace reference {
// Serial brute-force renderers (every pixel against every triangle). Kept as
// the per-pixel oracle for the parallel BVH renderers.
GrayImage render_shaded(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light = {});
RgbImage render_rgb(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light = {});
}  // namespace reference

// Crude object geometry: axis-aligned boxes and their faces.
struct SeedGeometry {
  struct Face {
    Vec3 centroid;
    Vec3 normal;
  };

  std::vector<Aabb> boxes;

  Aabb bounds() const;
  std::vector<Face> faces() const;
};

}  // namespace dronerf
