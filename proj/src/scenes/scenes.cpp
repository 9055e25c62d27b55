#include "dronerf/scenes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dronerf::scenes {

int MeshBuilder::cells(double length) const { return std::max(1, static_cast<int>(std::ceil(length / cell_ - 1e-9))); }

void MeshBuilder::quad(const Vec3& origin, const Vec3& u, const Vec3& v, const Paint& paint) {
  const int nu = cells(u.norm());
  const int nv = cells(v.norm());
  const int base = static_cast<int>(vertices_.size());
  for (int j = 0; j <= nv; ++j) {
    for (int i = 0; i <= nu; ++i) vertices_.push_back(origin + u * (double(i) / nu) + v * (double(j) / nv));
  }
  auto id = [&](int i, int j) { return base + j * (nu + 1) + i; };
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const Vec3 c = paint.at(i, j);
      triangles_.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles_.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      albedo_.push_back(c);
      albedo_.push_back(c);
    }
  }
}

void MeshBuilder::box(const Vec3& lo, const Vec3& hi, const Paint& sides, const Paint& top) {
  const Vec3 d = hi - lo;
  const Vec3 dx(d.x(), 0, 0), dy(0, d.y(), 0), dz(0, 0, d.z());
  quad(lo, dy, dx, sides);                                   // -z
  quad(Vec3(lo.x(), lo.y(), hi.z()), dx, dy, top);           // +z
  quad(lo, dx, dz, sides);                                   // -y
  quad(Vec3(lo.x(), hi.y(), lo.z()), dz, dx, sides);         // +y
  quad(lo, dz, dy, sides);                                   // -x
  quad(Vec3(hi.x(), lo.y(), lo.z()), dy, dz, sides);         // +x
}

void MeshBuilder::disk(const Vec3& center, double radius, bool up, const Paint& paint) {
  const int segments = std::max(12, cells(2.0 * std::numbers::pi * radius));
  const int rings = cells(radius);
  const int base = static_cast<int>(vertices_.size());
  vertices_.push_back(center);
  for (int r = 1; r <= rings; ++r) {
    const double rr = radius * r / rings;
    for (int k = 0; k < segments; ++k) {
      const double a = 2.0 * std::numbers::pi * k / segments;
      vertices_.push_back(center + Vec3(rr * std::cos(a), rr * std::sin(a), 0.0));
    }
  }
  auto id = [&](int r, int k) { return r == 0 ? base : base + 1 + (r - 1) * segments + (k % segments); };
  auto emit = [&](int a, int b, int c, const Vec3& color) {
    if (up) triangles_.push_back({a, b, c});
    else triangles_.push_back({a, c, b});
    albedo_.push_back(color);
  };
  for (int k = 0; k < segments; ++k) emit(id(0, 0), id(1, k), id(1, k + 1), paint.at(k, 0));
  for (int r = 1; r < rings; ++r) {
    for (int k = 0; k < segments; ++k) {
      const Vec3 c = paint.at(k, r);
      emit(id(r, k), id(r + 1, k), id(r + 1, k + 1), c);
      emit(id(r, k), id(r + 1, k + 1), id(r, k + 1), c);
    }
  }
}

void MeshBuilder::cylinder(const Vec3& base, double radius, double height, const Paint& side, const Paint& top,
                           bool bottom_cap) {
  const int segments = std::max(12, cells(2.0 * std::numbers::pi * radius));
  const int rings = cells(height);
  const int first = static_cast<int>(vertices_.size());
  for (int j = 0; j <= rings; ++j) {
    for (int k = 0; k < segments; ++k) {
      const double a = 2.0 * std::numbers::pi * k / segments;
      vertices_.push_back(base + Vec3(radius * std::cos(a), radius * std::sin(a), height * j / rings));
    }
  }
  auto id = [&](int k, int j) { return first + j * segments + (k % segments); };
  for (int j = 0; j < rings; ++j) {
    for (int k = 0; k < segments; ++k) {
      const Vec3 c = side.at(k, j);
      triangles_.push_back({id(k, j), id(k + 1, j), id(k + 1, j + 1)});
      triangles_.push_back({id(k, j), id(k + 1, j + 1), id(k, j + 1)});
      albedo_.push_back(c);
      albedo_.push_back(c);
    }
  }
  disk(base + Vec3(0, 0, height), radius, true, top);
  if (bottom_cap) disk(base, radius, false, side);
}

void MeshBuilder::container(const Vec3& lo, const Vec3& hi, double wall, const Paint& outer, const Paint& inner,
                            const Paint& rim) {
  const Vec3 d = hi - lo;
  const Vec3 dx(d.x(), 0, 0), dy(0, d.y(), 0), dz(0, 0, d.z());
  quad(lo, dy, dx, outer);
  quad(lo, dx, dz, outer);
  quad(Vec3(lo.x(), hi.y(), lo.z()), dz, dx, outer);
  quad(lo, dz, dy, outer);
  quad(Vec3(hi.x(), lo.y(), lo.z()), dy, dz, outer);

  const Vec3 a(lo.x() + wall, lo.y() + wall, lo.z() + wall);
  const Vec3 b(hi.x() - wall, hi.y() - wall, hi.z());
  const Vec3 e = b - a;
  const Vec3 ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
  quad(a, ex, ey, inner);                                  // floor, up
  quad(a, ey, ez, inner);                                  // faces +x
  quad(Vec3(b.x(), a.y(), a.z()), ez, ey, inner);          // faces -x
  quad(a, ez, ex, inner);                                  // faces +y
  quad(Vec3(a.x(), b.y(), a.z()), ex, ez, inner);          // faces -y

  const double z = hi.z();
  quad(Vec3(lo.x(), lo.y(), z), Vec3(d.x(), 0, 0), Vec3(0, wall, 0), rim);
  quad(Vec3(lo.x(), b.y(), z), Vec3(d.x(), 0, 0), Vec3(0, wall, 0), rim);
  quad(Vec3(lo.x(), a.y(), z), Vec3(wall, 0, 0), Vec3(0, e.y(), 0), rim);
  quad(Vec3(b.x(), a.y(), z), Vec3(wall, 0, 0), Vec3(0, e.y(), 0), rim);
}

TriangleMesh MeshBuilder::build() const { return TriangleMesh(vertices_, triangles_, albedo_); }

namespace {

Vec3 rgb(double r, double g, double b) { return Vec3(r, g, b); }

// Symmetric pair of boxes mirrored across x = 0.
void mirrored(MeshBuilder& m, const Vec3& lo, const Vec3& hi, const Paint& sides, const Paint& top) {
  m.box(lo, hi, sides, top);
  m.box(Vec3(-hi.x(), lo.y(), lo.z()), Vec3(-lo.x(), hi.y(), hi.z()), sides, top);
}

// Standing figure carrying a loaded tray in front of its chest, wearing a
// brimmed hat. About 1.95 m tall and 0.7 m across.
TriangleMesh tall_figure() {
  MeshBuilder m;
  const auto shoe = Paint::solid(rgb(0.25, 0.15, 0.08));
  const auto jeans = Paint::checker(rgb(0.15, 0.25, 0.6), rgb(0.2, 0.35, 0.75), 2);
  const auto shirt = Paint::checker(rgb(0.85, 0.15, 0.12), rgb(0.95, 0.92, 0.85), 2);
  const auto shoulders = Paint::solid(rgb(0.95, 0.8, 0.1));
  const auto sleeve = Paint::solid(rgb(0.95, 0.55, 0.1));
  const auto skin = Paint::solid(rgb(0.9, 0.7, 0.55));
  const auto hair = Paint::solid(rgb(0.35, 0.2, 0.1));

  mirrored(m, {0.04, -0.17, 0.0}, {0.2, 0.1, 0.08}, shoe, shoe);
  mirrored(m, {0.05, -0.08, 0.06}, {0.19, 0.08, 0.92}, jeans, jeans);
  m.box({-0.24, -0.13, 0.9}, {0.24, 0.13, 1.5}, shirt, shoulders);
  mirrored(m, {0.23, -0.06, 1.05}, {0.35, 0.06, 1.48}, sleeve, sleeve);
  mirrored(m, {0.23, -0.45, 1.02}, {0.35, 0.0, 1.12}, skin, skin);

  m.box({-0.3, -0.56, 1.11}, {0.3, -0.24, 1.15}, Paint::solid(rgb(0.5, 0.5, 0.5)),
        Paint::checker(rgb(0.1, 0.6, 0.25), rgb(0.9, 0.95, 0.9), 1));
  m.cylinder({-0.15, -0.4, 1.15}, 0.05, 0.12, Paint::solid(rgb(0.55, 0.2, 0.7)), Paint::solid(rgb(0.2, 0.1, 0.05)));
  m.box({0.05, -0.5, 1.14}, {0.2, -0.34, 1.25}, Paint::solid(rgb(0.1, 0.75, 0.8)),
        Paint::checker(rgb(0.95, 0.95, 0.2), rgb(0.1, 0.4, 0.9), 1));

  m.cylinder({0.0, -0.01, 1.47}, 0.06, 0.11, skin, skin, false);
  m.box({-0.11, -0.12, 1.56}, {0.11, 0.1, 1.8}, skin, hair);
  mirrored(m, {0.03, -0.13, 1.68}, {0.07, -0.11, 1.71}, Paint::solid(rgb(0.05, 0.05, 0.05)),
           Paint::solid(rgb(0.05, 0.05, 0.05)));
  m.cylinder({0.0, -0.01, 1.78}, 0.22, 0.03, Paint::solid(rgb(0.45, 0.05, 0.1)),
             Paint::checker(rgb(0.6, 0.1, 0.15), rgb(0.95, 0.85, 0.3), 2));
  m.cylinder({0.0, -0.01, 1.8}, 0.12, 0.14, Paint::solid(rgb(0.75, 0.1, 0.15)), Paint::solid(rgb(0.08, 0.08, 0.08)));
  return m.build();
}

// Acoustic guitar standing upright on a stand.
TriangleMesh guitar() {
  MeshBuilder m;
  const auto wood = Paint::checker(rgb(0.8, 0.55, 0.25), rgb(0.7, 0.45, 0.2), 2);
  const auto dark = Paint::solid(rgb(0.2, 0.1, 0.05));
  const auto metal = Paint::solid(rgb(0.6, 0.6, 0.65));
  m.box({-0.25, -0.2, 0.0}, {0.25, 0.2, 0.05}, metal, Paint::checker(rgb(0.3, 0.3, 0.35), rgb(0.8, 0.8, 0.2), 1));
  m.cylinder({0.0, 0.0, 0.04}, 0.03, 0.28, metal, metal, false);
  m.box({-0.2, -0.05, 0.3}, {0.2, 0.05, 0.8}, wood, Paint::solid(rgb(0.9, 0.7, 0.4)));
  m.box({-0.16, -0.05, 0.79}, {0.16, 0.05, 1.05}, wood, Paint::solid(rgb(0.95, 0.85, 0.5)));
  m.box({-0.07, -0.065, 0.78}, {0.07, -0.045, 0.92}, dark, dark);
  m.box({-0.05, -0.065, 0.4}, {0.05, -0.045, 0.46}, Paint::solid(rgb(0.1, 0.1, 0.1)), dark);
  m.box({-0.03, -0.03, 1.03}, {0.03, 0.03, 1.6}, Paint::checker(rgb(0.3, 0.15, 0.05), rgb(0.9, 0.9, 0.85), 1),
        dark);
  m.box({-0.05, -0.02, 1.58}, {0.05, 0.02, 1.75}, Paint::solid(rgb(0.15, 0.08, 0.04)),
        Paint::solid(rgb(0.9, 0.2, 0.2)));
  return m.build();
}

// Four-legged robot with a head, ears, sensor mast and a tail.
TriangleMesh robot_dog() {
  MeshBuilder m;
  const auto shell = Paint::checker(rgb(0.9, 0.9, 0.9), rgb(0.95, 0.6, 0.1), 3);
  const auto joint = Paint::solid(rgb(0.2, 0.2, 0.25));
  const auto leg = Paint::solid(rgb(0.35, 0.35, 0.4));
  m.box({-0.5, -0.2, 0.3}, {0.5, 0.2, 0.55}, shell, Paint::checker(rgb(0.1, 0.3, 0.8), rgb(0.9, 0.9, 0.9), 2));
  for (double x : {-0.4, 0.32}) {
    for (double y : {-0.2, 0.12}) {
      m.box({x, y, 0.0}, {x + 0.08, y + 0.08, 0.32}, leg, leg);
      m.box({x - 0.01, y - 0.01, 0.0}, {x + 0.09, y + 0.09, 0.04}, joint, joint);
    }
  }
  m.box({0.45, -0.13, 0.48}, {0.72, 0.13, 0.7}, Paint::solid(rgb(0.95, 0.95, 0.95)),
        Paint::solid(rgb(0.95, 0.6, 0.1)));
  m.box({0.715, -0.09, 0.58}, {0.73, 0.09, 0.64}, Paint::solid(rgb(0.05, 0.05, 0.1)), joint);
  mirrored(m, {0.06, -0.04, 0.69}, {0.11, 0.04, 0.78}, joint, Paint::solid(rgb(0.9, 0.1, 0.1)));
  m.cylinder({-0.2, 0.0, 0.54}, 0.05, 0.16, joint, Paint::solid(rgb(0.1, 0.8, 0.3)));
  m.box({-0.75, -0.03, 0.48}, {-0.49, 0.03, 0.53}, joint, joint);
  return m.build();
}

// Open-top bin with thick walls, a lighter interior, and a label.
TriangleMesh recycle_bin() {
  MeshBuilder m;
  m.container({-0.3, -0.3, 0.0}, {0.3, 0.3, 0.9}, 0.04, Paint::checker(rgb(0.1, 0.5, 0.2), rgb(0.15, 0.6, 0.25), 3),
              Paint::checker(rgb(0.75, 0.75, 0.7), rgb(0.55, 0.55, 0.5), 2), Paint::solid(rgb(0.95, 0.95, 0.95)));
  m.box({-0.15, -0.31, 0.4}, {0.15, -0.29, 0.62}, Paint::checker(rgb(0.95, 0.95, 0.95), rgb(0.1, 0.3, 0.8), 1),
        Paint::solid(rgb(0.95, 0.95, 0.95)));
  m.box({-0.05, -0.05, 0.03}, {0.12, 0.1, 0.2}, Paint::solid(rgb(0.85, 0.2, 0.1)),
        Paint::solid(rgb(0.95, 0.9, 0.2)));
  return m.build();
}

// Unit cube centered at the origin, 8 shared vertices.
TriangleMesh cube() {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.emplace_back((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5);
  std::vector<std::array<int, 3>> t = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                                       {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  std::vector<Vec3> a = {rgb(0.8, 0.3, 0.2), rgb(0.8, 0.3, 0.2), rgb(0.2, 0.8, 0.3), rgb(0.2, 0.8, 0.3),
                         rgb(0.2, 0.3, 0.8), rgb(0.2, 0.3, 0.8), rgb(0.8, 0.8, 0.2), rgb(0.8, 0.8, 0.2),
                         rgb(0.8, 0.2, 0.8), rgb(0.8, 0.2, 0.8), rgb(0.2, 0.8, 0.8), rgb(0.2, 0.8, 0.8)};
  return TriangleMesh(std::move(v), std::move(t), std::move(a));
}

}  // namespace

std::vector<SceneInfo> catalogue() {
  return {{"tall_figure", "standing figure holding a tray, brimmed hat"},
          {"guitar", "thin elongated guitar on a stand"},
          {"robot_dog", "low wide quadruped robot"},
          {"recycle_bin", "open-top concave container"},
          {"cube", "unit cube at the origin"}};
}

TriangleMesh make_scene(const std::string& name) {
  if (name == "tall_figure") return tall_figure();
  if (name == "guitar") return guitar();
  if (name == "robot_dog") return robot_dog();
  if (name == "recycle_bin") return recycle_bin();
  if (name == "cube") return cube();
  throw std::invalid_argument("unknown scene " + name);
}

}  // namespace dronerf::scenes
