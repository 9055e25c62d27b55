#include <cmath>
#include <stdexcept>

#include "dronerf/errors.hpp"
#include "dronerf/nerf.hpp"
#include "march.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace dronerf::nerf {

namespace {

// Flush-to-zero and denormals-are-zero for the calling thread, restored on exit.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace

template <typename S>
RaySet<S> collect_rays(std::span<const TrainingView> views, const SceneBox& box) {
  RaySet<S> out;
  const Aabb unit{Vec3::Zero(), Vec3::Ones()};
  for (const TrainingView& v : views) {
    const Intrinsics& k = v.rig.intrinsics();
    if (v.image.width() != k.width || v.image.height() != k.height) {
      throw std::invalid_argument("training image size differs from its intrinsics");
    }
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        const Ray world = v.rig.pixel_ray(x + 0.5, y + 0.5);
        const Vec3 o = box.to_unit(world.origin);
        const auto hit = intersect_box(Ray{o, world.direction}, unit);
        if (!hit || !(hit->t_exit > hit->t_enter)) continue;
        out.origin.push_back(o);
        out.direction.push_back(world.direction);
        out.near.push_back(hit->t_enter);
        out.far.push_back(hit->t_exit);
        out.target.push_back({static_cast<S>(v.image(x, y, 0)), static_cast<S>(v.image(x, y, 1)),
                              static_cast<S>(v.image(x, y, 2))});
      }
    }
  }
  return out;
}

template RaySet<float> collect_rays(std::span<const TrainingView>, const SceneBox&);
template RaySet<double> collect_rays(std::span<const TrainingView>, const SceneBox&);

template <typename S>
double loss_and_gradient(const RadianceField<S>& field, const RaySet<S>& rays, std::span<const uint32_t> ids,
                         int samples, const Vec3& background, std::span<const S> jitter, std::span<S> grad,
                         int chunk_rays) {
  if (ids.empty()) throw std::invalid_argument("empty ray batch");
  if (!jitter.empty() && jitter.size() != ids.size() * samples) throw std::invalid_argument("jitter length mismatch");
  if (grad.size() != field.layout().total) throw std::invalid_argument("gradient buffer has the wrong length");
  const int chunk = std::max(1, chunk_rays);
  const int chunks = static_cast<int>((ids.size() + chunk - 1) / chunk);
  const double scale = 1.0 / (3.0 * static_cast<double>(ids.size()));

  std::vector<std::vector<S, Eigen::aligned_allocator<S>>> partial(chunks);
  std::vector<double> partial_loss(chunks, 0.0);
#pragma omp parallel
  {
    const FlushDenormals ftz;
    detail::March<S> m;
    std::vector<Vec3> o, d;
    std::vector<double> nr, fr;
#pragma omp for schedule(dynamic)
    for (int ci = 0; ci < chunks; ++ci) {
      const size_t begin = static_cast<size_t>(ci) * chunk;
      const size_t end = std::min(ids.size(), begin + chunk);
      o.clear();
      d.clear();
      nr.clear();
      fr.clear();
      for (size_t i = begin; i < end; ++i) {
        const uint32_t r = ids[i];
        o.push_back(rays.origin[r]);
        d.push_back(rays.direction[r]);
        nr.push_back(rays.near[r]);
        fr.push_back(rays.far[r]);
      }
      const S* jit = jitter.empty() ? nullptr : jitter.data() + begin * samples;
      detail::march_forward<S>(field, o, d, nr, fr, samples, jit, background, m);

      const Eigen::Index count = static_cast<Eigen::Index>(end - begin);
      Eigen::Matrix<S, 3, Eigen::Dynamic> d_color(3, count);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < count; ++i) {
        const auto& target = rays.target[ids[begin + i]];
        for (int c = 0; c < 3; ++c) {
          const double diff = static_cast<double>(m.color(c, i)) - target[c];
          loss += diff * diff;
          d_color(c, i) = static_cast<S>(2.0 * diff * scale);
        }
      }
      partial_loss[ci] = loss;
      partial[ci].assign(grad.size(), S(0));
      detail::march_backward<S>(field, m, d_color, background, partial[ci]);
    }
  }

  // Fixed-order reduction keeps results independent of the thread count.
  double loss = 0.0;
  for (int ci = 0; ci < chunks; ++ci) {
    loss += partial_loss[ci];
    const auto& p = partial[ci];
    for (size_t i = 0; i < grad.size(); ++i) grad[i] += p[i];
  }
  return loss * scale;
}

template double loss_and_gradient(const RadianceField<float>&, const RaySet<float>&, std::span<const uint32_t>, int,
                                  const Vec3&, std::span<const float>, std::span<float>, int);
template double loss_and_gradient(const RadianceField<double>&, const RaySet<double>&, std::span<const uint32_t>,
                                  int, const Vec3&, std::span<const double>, std::span<double>, int);

namespace reference {

template <typename S>
double photometric_loss(const RadianceField<S>& field, const RaySet<S>& rays, std::span<const uint32_t> ids,
                        int samples, const Vec3& background) {
  if (ids.empty()) throw std::invalid_argument("empty ray batch");
  const FieldFn fn = [&](const Vec3& x, const Vec3& dir) {
    const FieldSample<S> s = field.eval(x.cwiseMax(0.0).cwiseMin(1.0), dir);
    return std::pair<Vec3, double>{Vec3(s.color[0], s.color[1], s.color[2]), static_cast<double>(s.density)};
  };
  double loss = 0.0;
  for (uint32_t r : ids) {
    const CompositeResult res =
        volume_render(Ray{rays.origin[r], rays.direction[r]}, rays.near[r], rays.far[r], samples, fn, background);
    for (int c = 0; c < 3; ++c) {
      const double diff = res.color[c] - static_cast<double>(rays.target[r][c]);
      loss += diff * diff;
    }
  }
  return loss / (3.0 * static_cast<double>(ids.size()));
}

template double photometric_loss(const RadianceField<float>&, const RaySet<float>&, std::span<const uint32_t>, int,
                                 const Vec3&);
template double photometric_loss(const RadianceField<double>&, const RaySet<double>&, std::span<const uint32_t>, int,
                                 const Vec3&);

}  // namespace reference

template <typename S>
TrainResult train(RadianceField<S>& field, std::span<const TrainingView> views, const SceneBox& box,
                  const TrainConfig& cfg, uint64_t seed) {
  if (views.size() < 2) throw std::invalid_argument("training needs at least 2 views");
  if (cfg.iterations < 0 || cfg.warmup_iterations < 0 || cfg.batch_rays < 1 || cfg.samples < 2) throw ConfigError("invalid training config");
  const RaySet<S> rays = collect_rays<S>(views, box);
  if (rays.size() == 0) throw std::invalid_argument("no training ray crosses the scene box");
  const FlushDenormals ftz;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint32_t> pick(0, static_cast<uint32_t>(rays.size() - 1));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const size_t n = field.layout().total;
  std::vector<S> grad(n), m1(n, S(0)), m2(n, S(0));
  std::vector<uint32_t> ids(cfg.batch_rays);
  std::vector<S> jitter(static_cast<size_t>(cfg.batch_rays) * cfg.samples);

  TrainResult result;
  result.loss_history.reserve(cfg.iterations);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& id : ids) id = pick(rng);
    for (auto& j : jitter) j = static_cast<S>(u01(rng));
    std::fill(grad.begin(), grad.end(), S(0));
    const double loss =
        loss_and_gradient<S>(field, rays, ids, cfg.samples, cfg.background, jitter, grad, cfg.chunk_rays);
    if (!std::isfinite(loss)) {
      throw TrainingDiverged(it, it, "non-finite loss at iteration " + std::to_string(it));
    }
    result.loss_history.push_back(loss);

    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double ramp = it < cfg.warmup_iterations ? (it + 1.0) / cfg.warmup_iterations : 1.0;
    const double step = ramp * cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    auto params = field.params();
    const S beta1 = static_cast<S>(cfg.beta1);
    const S beta2 = static_cast<S>(cfg.beta2);
    for (size_t i = 0; i < n; ++i) {
      const S g = grad[i];
      m1[i] = beta1 * m1[i] + (S(1) - beta1) * g;
      m2[i] = beta2 * m2[i] + (S(1) - beta2) * g * g;
      params[i] -= static_cast<S>(step * m1[i] / (std::sqrt(static_cast<double>(m2[i])) + cfg.epsilon));
    }
  }
  return result;
}

template TrainResult train(RadianceField<float>&, std::span<const TrainingView>, const SceneBox&, const TrainConfig&,
                           uint64_t);
template TrainResult train(RadianceField<double>&, std::span<const TrainingView>, const SceneBox&,
                           const TrainConfig&, uint64_t);

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"iterations", c.iterations},
       {"batch_rays", c.batch_rays},
       {"samples", c.samples},
       {"learning_rate", c.learning_rate},
       {"warmup_iterations", c.warmup_iterations},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon},
       {"background", {c.background.x(), c.background.y(), c.background.z()}},
       {"chunk_rays", c.chunk_rays}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.iterations = j.value("iterations", c.iterations);
  c.batch_rays = j.value("batch_rays", c.batch_rays);
  c.samples = j.value("samples", c.samples);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.warmup_iterations = j.value("warmup_iterations", c.warmup_iterations);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("background")) {
    const auto bg = j.at("background").get<std::vector<double>>();
    if (bg.size() != 3) throw ConfigError("background must have 3 components");
    c.background = Vec3(bg[0], bg[1], bg[2]);
  }
  c.chunk_rays = j.value("chunk_rays", c.chunk_rays);
}

}  // namespace dronerf::nerf
