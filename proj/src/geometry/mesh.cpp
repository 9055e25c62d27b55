#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dronerf/errors.hpp"
#include "dronerf/geometry.hpp"

namespace dronerf {

namespace {
constexpr double kHitEpsilon = 1e-9;
constexpr int kLeafSize = 4;
}  // namespace

std::optional<double> ray_triangle_hit(const Vec3& origin, const Vec3& direction,
                                       const std::array<Vec3, 3>& tri) {
  const Vec3 e1 = tri[1] - tri[0];
  const Vec3 e2 = tri[2] - tri[0];
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - tri[0];
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= kHitEpsilon) return std::nullopt;
  return t;
}

std::optional<BoxHit> intersect_box(const Ray& ray, const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < box.min[a] || ray.origin[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double lo = (box.min[a] - ray.origin[a]) / d;
    double hi = (box.max[a] - ray.origin[a]) / d;
    double sign = -1.0;
    if (lo > hi) {
      std::swap(lo, hi);
      sign = 1.0;
    }
    if (lo > t0) {
      t0 = lo;
      normal = Vec3::Zero();
      normal[a] = sign;
    }
    t1 = std::min(t1, hi);
  }
  if (t0 > t1 || t1 <= 0.0) return std::nullopt;
  return BoxHit{std::max(t0, 0.0), t1, normal};
}

Aabb Aabb::dilated(double fraction) const {
  const Vec3 pad = 0.5 * fraction * extent();
  return Aabb{min - pad, max + pad};
}

Aabb SeedGeometry::bounds() const {
  Aabb b;
  for (const auto& box : boxes) b.extend(box);
  return b;
}

std::vector<SeedGeometry::Face> SeedGeometry::faces() const {
  std::vector<Face> out;
  out.reserve(boxes.size() * 6);
  for (const auto& box : boxes) {
    const Vec3 c = box.center();
    for (int a = 0; a < 3; ++a) {
      for (double s : {-1.0, 1.0}) {
        Vec3 n = Vec3::Zero();
        n[a] = s;
        Vec3 p = c;
        p[a] = s < 0 ? box.min[a] : box.max[a];
        out.push_back({p, n});
      }
    }
  }
  return out;
}

// Median-split bounding volume hierarchy over triangle indices.
struct TriangleMesh::Bvh {
  struct Node {
    Aabb bounds;
    int left = -1;   // first triangle slot for leaves
    int right = -1;
    int count = 0;   // > 0 for leaves
  };
  std::vector<Node> nodes;
  std::vector<int> order;

  explicit Bvh(const TriangleMesh& mesh) {
    order.resize(mesh.triangle_count());
    std::iota(order.begin(), order.end(), 0);
    nodes.reserve(2 * order.size());
    build(mesh, 0, static_cast<int>(order.size()));
  }

  int build(const TriangleMesh& mesh, int begin, int end) {
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    Aabb bounds;
    Aabb centroid_bounds;
    for (int i = begin; i < end; ++i) {
      for (const auto& v : mesh.corners(order[i])) bounds.extend(v);
      centroid_bounds.extend(mesh.centroid(order[i]));
    }
    nodes[index].bounds = bounds;
    if (end - begin <= kLeafSize) {
      nodes[index].left = begin;
      nodes[index].count = end - begin;
      return index;
    }
    int axis = 0;
    centroid_bounds.extent().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](int a, int b) { return mesh.centroid(a)[axis] < mesh.centroid(b)[axis]; });
    const int left = build(mesh, begin, mid);
    const int right = build(mesh, mid, end);
    nodes[index].left = left;
    nodes[index].right = right;
    return index;
  }

  static bool hits_box(const Aabb& b, const Vec3& origin, const Vec3& inv_dir, double t_max) {
    double t0 = 0.0;
    double t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double lo = (b.min[a] - origin[a]) * inv_dir[a];
      double hi = (b.max[a] - origin[a]) * inv_dir[a];
      if (lo > hi) std::swap(lo, hi);
      // NaN from 0 * inf falls through both comparisons and leaves the slab open.
      t0 = lo > t0 ? lo : t0;
      t1 = hi < t1 ? hi : t1;
      if (t0 > t1) return false;
    }
    return true;
  }

  std::optional<MeshHit> intersect(const TriangleMesh& mesh, const Ray& ray, double max_distance) const {
    std::optional<MeshHit> best;
    double t_best = max_distance;
    const Vec3 inv = ray.direction.cwiseInverse();
    int stack[96];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes[stack[--top]];
      if (!hits_box(node.bounds, ray.origin, inv, t_best)) continue;
      if (node.count > 0) {
        for (int i = node.left; i < node.left + node.count; ++i) {
          const int tri = order[i];
          if (auto t = ray_triangle_hit(ray.origin, ray.direction, mesh.corners(tri)); t && *t < t_best) {
            t_best = *t;
            best = MeshHit{*t, tri};
          }
        }
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
    return best;
  }
};

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles,
                           std::vector<Vec3> albedo)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), albedo_(std::move(albedo)) {
  if (triangles_.empty()) throw MeshError("mesh has no triangles");
  if (albedo_.empty()) albedo_.assign(triangles_.size(), Vec3::Constant(0.5));
  if (albedo_.size() != triangles_.size()) throw MeshError("albedo count does not match triangle count");
  const int nv = static_cast<int>(vertices_.size());
  normals_.reserve(triangles_.size());
  centroids_.reserve(triangles_.size());
  for (size_t t = 0; t < triangles_.size(); ++t) {
    for (int idx : triangles_[t]) {
      if (idx < 0 || idx >= nv) {
        throw MeshError("triangle " + std::to_string(t) + " references vertex " + std::to_string(idx) +
                        " but the mesh has " + std::to_string(nv) + " vertices");
      }
    }
    const auto c = corners(static_cast<int>(t));
    const Vec3 n = (c[1] - c[0]).cross(c[2] - c[0]);
    if (n.norm() < 1e-14) throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    normals_.push_back(n.normalized());
    centroids_.push_back((c[0] + c[1] + c[2]) / 3.0);
  }
  for (const auto& v : vertices_) bounds_.extend(v);
  bvh_ = std::make_shared<const Bvh>(*this);
}

TriangleMesh::~TriangleMesh() = default;
TriangleMesh::TriangleMesh(const TriangleMesh&) = default;
TriangleMesh& TriangleMesh::operator=(const TriangleMesh&) = default;
TriangleMesh::TriangleMesh(TriangleMesh&&) noexcept = default;
TriangleMesh& TriangleMesh::operator=(TriangleMesh&&) noexcept = default;

std::optional<MeshHit> TriangleMesh::intersect(const Ray& ray, double max_distance) const {
  return bvh_->intersect(*this, ray, max_distance);
}

TriangleMesh parse_mesh(std::string_view text) {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec3> albedo;
  Vec3 current_albedo = Vec3::Constant(0.5);

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw MeshError("line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "a") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("expected three numbers after '" + tag + "'");
      if (tag == "v") {
        vertices.emplace_back(x, y, z);
      } else {
        if (x < 0 || x > 1 || y < 0 || y > 1 || z < 0 || z > 1) fail("albedo outside [0, 1]");
        current_albedo = Vec3(x, y, z);
      }
    } else if (tag == "f") {
      long a, b, c;
      if (!(ls >> a >> b >> c)) fail("expected three vertex indices after 'f'");
      std::string extra;
      if (ls >> extra) fail("only triangular faces are supported");
      const long nv = static_cast<long>(vertices.size());
      for (long idx : {a, b, c}) {
        if (idx < 1 || idx > nv) {
          fail("face index " + std::to_string(idx) + " out of range (" + std::to_string(nv) +
               " vertices defined so far)");
        }
      }
      faces.push_back({static_cast<int>(a - 1), static_cast<int>(b - 1), static_cast<int>(c - 1)});
      albedo.push_back(current_albedo);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (faces.empty()) throw MeshError("mesh has no triangles");
  return TriangleMesh(std::move(vertices), std::move(faces), std::move(albedo));
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw MeshError("cannot open mesh file " + path.string());
  std::stringstream buffer;
  buffer << file.rdbuf();
  try {
    return parse_mesh(buffer.str());
  } catch (const MeshError& e) {
    throw MeshError(path.string() + ": " + e.what());
  }
}

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  Vec3 current = Vec3::Constant(-1.0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.albedo(t) != current) {
      current = mesh.albedo(t);
      out << "a " << current.x() << ' ' << current.y() << ' ' << current.z() << '\n';
    }
    const auto& f = mesh.triangles()[t];
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

}  // namespace dronerf
