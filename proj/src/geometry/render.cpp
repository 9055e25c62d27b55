#include "dronerf/geometry.hpp"

namespace dronerf {

namespace {

template <int C, typename HitFn>
void shade_pixel(Image<float, C>& img, int x, int y, const TriangleMesh& mesh, const CameraRig& rig,
                 const Lighting& light, HitFn&& nearest_hit) {
  const Ray ray = rig.pixel_ray(x + 0.5, y + 0.5);
  const std::optional<MeshHit> hit = nearest_hit(ray);
  if (!hit) return;
  const double s = light.shade(mesh.normal(hit->triangle));
  if constexpr (C == 1) {
    img(x, y) = static_cast<float>(s);
  } else {
    const Vec3& a = mesh.albedo(hit->triangle);
    for (int c = 0; c < 3; ++c) img(x, y, c) = static_cast<float>(a[c] * s);
  }
}

template <int C>
Image<float, C> render_parallel(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  const auto& k = rig.intrinsics();
  Image<float, C> img(k.width, k.height, 0.0f);
  auto nearest = [&](const Ray& r) { return mesh.intersect(r); };
#pragma omp parallel for schedule(dynamic, 4)
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) shade_pixel(img, x, y, mesh, rig, light, nearest);
  }
  return img;
}

template <int C>
Image<float, C> render_serial(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  const auto& k = rig.intrinsics();
  Image<float, C> img(k.width, k.height, 0.0f);
  auto nearest = [&](const Ray& r) {
    std::optional<MeshHit> best;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      if (auto d = ray_triangle_hit(r.origin, r.direction, mesh.corners(t)); d && (!best || *d < best->distance)) {
        best = MeshHit{*d, t};
      }
    }
    return best;
  };
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) shade_pixel(img, x, y, mesh, rig, light, nearest);
  }
  return img;
}

}  // namespace

GrayImage render_shaded(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  return render_parallel<1>(mesh, rig, light);
}

RgbImage render_rgb(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  return render_parallel<3>(mesh, rig, light);
}

namespace reference {

GrayImage render_shaded(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  return render_serial<1>(mesh, rig, light);
}

RgbImage render_rgb(const TriangleMesh& mesh, const CameraRig& rig, const Lighting& light) {
  return render_serial<3>(mesh, rig, light);
}

}  // namespace reference

}  // namespace dronerf
