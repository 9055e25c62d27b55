#include <cmath>
#include <stdexcept>

#include "dronerf/nerf.hpp"
#include "march.hpp"

namespace dronerf::nerf {

SceneBox SceneBox::around(const Aabb& box, double fraction) {
  if (!box.valid()) throw std::invalid_argument("scene box needs a valid bounding box");
  const double side = box.extent().maxCoeff() * (1.0 + fraction);
  if (!(side > 0.0)) throw std::invalid_argument("scene box has zero size");
  return SceneBox{box.center(), side};
}

CompositeResult composite(std::span<const double> sigma, std::span<const Vec3> color, std::span<const double> delta,
                          const Vec3& background) {
  if (sigma.size() != color.size() || sigma.size() != delta.size()) {
    throw std::invalid_argument("composite inputs differ in length");
  }
  CompositeResult out;
  out.weights.resize(sigma.size());
  double trans = 1.0;
  for (size_t i = 0; i < sigma.size(); ++i) {
    const double next = trans * std::exp(-sigma[i] * delta[i]);
    out.weights[i] = trans - next;
    out.color += out.weights[i] * color[i];
    trans = next;
  }
  out.opacity = 1.0 - trans;
  out.color += trans * background;
  return out;
}

void sample_depths(double near, double far, int n, std::mt19937_64* rng, std::vector<double>& t,
                   std::vector<double>& delta) {
  if (!(near < far)) throw std::invalid_argument("sample_depths needs near < far");
  if (n < 2) throw std::invalid_argument("sample_depths needs at least 2 samples");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double bin = (far - near) / n;
  t.resize(n);
  delta.resize(n);
  for (int i = 0; i < n; ++i) t[i] = near + (i + (rng ? u01(*rng) : 0.5)) * bin;
  for (int i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = far - t[n - 1];
}

CompositeResult volume_render(const Ray& ray, double near, double far, int n_samples, const FieldFn& field,
                              const Vec3& background, std::mt19937_64* rng) {
  std::vector<double> t;
  std::vector<double> delta;
  sample_depths(near, far, n_samples, rng, t, delta);
  std::vector<double> sigma(n_samples);
  std::vector<Vec3> color(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const auto [c, s] = field(ray.origin + t[i] * ray.direction, ray.direction);
    color[i] = c;
    sigma[i] = s;
  }
  return composite(sigma, color, delta, background);
}

namespace {

struct PixelRay {
  int pixel;
  Vec3 origin;
  Vec3 direction;
  double near;
  double far;
};

// Pixels whose rays cross the unit cube, with entry/exit depths in unit-cube units.
std::vector<PixelRay> crossing_rays(const SceneBox& box, const CameraRig& rig) {
  const Intrinsics& k = rig.intrinsics();
  const Aabb unit{Vec3::Zero(), Vec3::Ones()};
  std::vector<PixelRay> out;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Ray world = rig.pixel_ray(x + 0.5, y + 0.5);
      const Ray local{box.to_unit(world.origin), world.direction};
      const auto hit = intersect_box(local, unit);
      if (!hit || !(hit->t_exit > hit->t_enter)) continue;
      out.push_back({y * k.width + x, local.origin, local.direction, hit->t_enter, hit->t_exit});
    }
  }
  return out;
}

RgbImage background_image(const CameraRig& rig, const Vec3& bg) {
  RgbImage img(rig.intrinsics().width, rig.intrinsics().height);
  auto px = img.data();
  for (size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) px[i * 3 + c] = static_cast<float>(bg[c]);
  }
  return img;
}

}  // namespace

template <typename S>
RgbImage render_novel_view(const RadianceField<S>& field, const SceneBox& box, const CameraRig& rig,
                           const RenderConfig& cfg) {
  const std::vector<PixelRay> rays = crossing_rays(box, rig);
  RgbImage img = background_image(rig, cfg.background);
  const int chunk = std::max(1, cfg.chunk_rays);
  const int chunks = static_cast<int>((rays.size() + chunk - 1) / chunk);
#pragma omp parallel
  {
    detail::March<S> m;
    std::vector<Vec3> o, d;
    std::vector<double> nr, fr;
#pragma omp for schedule(dynamic)
    for (int ci = 0; ci < chunks; ++ci) {
      const size_t begin = static_cast<size_t>(ci) * chunk;
      const size_t end = std::min(rays.size(), begin + chunk);
      o.clear();
      d.clear();
      nr.clear();
      fr.clear();
      for (size_t i = begin; i < end; ++i) {
        o.push_back(rays[i].origin);
        d.push_back(rays[i].direction);
        nr.push_back(rays[i].near);
        fr.push_back(rays[i].far);
      }
      detail::march_forward<S>(field, o, d, nr, fr, cfg.samples, nullptr, cfg.background, m);
      auto px = img.data();
      for (size_t i = begin; i < end; ++i) {
        for (int c = 0; c < 3; ++c) {
          px[static_cast<size_t>(rays[i].pixel) * 3 + c] = static_cast<float>(m.color(c, static_cast<Eigen::Index>(i - begin)));
        }
      }
    }
  }
  return img;
}

template RgbImage render_novel_view(const RadianceField<float>&, const SceneBox&, const CameraRig&,
                                    const RenderConfig&);
template RgbImage render_novel_view(const RadianceField<double>&, const SceneBox&, const CameraRig&,
                                    const RenderConfig&);

namespace reference {

template <typename S>
RgbImage render_novel_view(const RadianceField<S>& field, const SceneBox& box, const CameraRig& rig,
                           const RenderConfig& cfg) {
  RgbImage img = background_image(rig, cfg.background);
  const FieldFn fn = [&](const Vec3& x, const Vec3& dir) {
    const FieldSample<S> s = field.eval(x.cwiseMax(0.0).cwiseMin(1.0), dir);
    return std::pair<Vec3, double>{Vec3(s.color[0], s.color[1], s.color[2]), static_cast<double>(s.density)};
  };
  auto px = img.data();
  for (const PixelRay& r : crossing_rays(box, rig)) {
    const CompositeResult res = volume_render(Ray{r.origin, r.direction}, r.near, r.far, cfg.samples, fn, cfg.background);
    for (int c = 0; c < 3; ++c) px[static_cast<size_t>(r.pixel) * 3 + c] = static_cast<float>(res.color[c]);
  }
  return img;
}

template RgbImage render_novel_view(const RadianceField<float>&, const SceneBox&, const CameraRig&,
                                    const RenderConfig&);
template RgbImage render_novel_view(const RadianceField<double>&, const SceneBox&, const CameraRig&,
                                    const RenderConfig&);

}  // namespace reference

}  // namespace dronerf::nerf
