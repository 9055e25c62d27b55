#pragma once

// Procedural synthetic scenes built from subdivided boxes and cylinders.
// Faces are tessellated at a roughly uniform cell size so that triangle
// counts track surface area.

#include <string>
#include <vector>

#include "dronerf/geometry.hpp"

namespace dronerf::scenes {

// Solid color, or a checkerboard of `a` and `b` with `period` cells per square.
struct Paint {
  Vec3 a = Vec3::Constant(0.5);
  Vec3 b = Vec3::Constant(0.5);
  int period = 0;

  static Paint solid(const Vec3& c) { return {c, c, 0}; }
  static Paint checker(const Vec3& a, const Vec3& b, int period) { return {a, b, period}; }
  Vec3 at(int i, int j) const { return period > 0 && ((i / period + j / period) % 2) ? b : a; }
};

class MeshBuilder {
 public:
  explicit MeshBuilder(double cell = 0.05) : cell_(cell) {}

  // Parallelogram origin + s u + t v, s, t in [0, 1]; front side along u x v.
  void quad(const Vec3& origin, const Vec3& u, const Vec3& v, const Paint& paint);
  void box(const Vec3& lo, const Vec3& hi, const Paint& sides, const Paint& top);
  void box(const Vec3& lo, const Vec3& hi, const Paint& paint) { box(lo, hi, paint, paint); }
  // Vertical cylinder standing on `base`.
  void cylinder(const Vec3& base, double radius, double height, const Paint& side, const Paint& top,
                bool bottom_cap = true);
  // Open-top box with walls of thickness `wall`; inner faces use `inner`.
  void container(const Vec3& lo, const Vec3& hi, double wall, const Paint& outer, const Paint& inner,
                 const Paint& rim);

  TriangleMesh build() const;

 private:
  int cells(double length) const;
  void disk(const Vec3& center, double radius, bool up, const Paint& paint);

  double cell_;
  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Vec3> albedo_;
};

struct SceneInfo {
  std::string name;
  std::string description;
};

// Catalogue of the bundled scenes, in generation order.
std::vector<SceneInfo> catalogue();
TriangleMesh make_scene(const std::string& name);

}  // namespace dronerf::scenes
