#pragma once

// Batched ray marching shared by the trainer and the renderer.

#include <span>
#include <vector>

#include "dronerf/nerf.hpp"

namespace dronerf::nerf::detail {

template <typename S>
struct March {
  int samples = 0;
  Eigen::Matrix<S, 3, Eigen::Dynamic> pos, dir;
  std::vector<S> delta;                     // rays * samples
  BatchCache<S> cache;
  Eigen::Matrix<S, 3, Eigen::Dynamic> color;  // per ray, composited
  std::vector<S> opacity;
};

// Rays are in unit-cube coordinates. `jitter` may be null (bin midpoints).
template <typename S>
void march_forward(const RadianceField<S>& field, std::span<const Vec3> origin, std::span<const Vec3> direction,
                   std::span<const double> near, std::span<const double> far, int samples, const S* jitter,
                   const Vec3& background, March<S>& m) {
  const size_t rays = origin.size();
  const Eigen::Index n = static_cast<Eigen::Index>(rays) * samples;
  m.samples = samples;
  m.pos.resize(3, n);
  m.dir.resize(3, n);
  m.delta.resize(n);
  for (size_t r = 0; r < rays; ++r) {
    const double bin = (far[r] - near[r]) / samples;
    const Eigen::Matrix<S, 3, 1> d = direction[r].cast<S>();
    double prev = 0.0;
    for (int i = 0; i < samples; ++i) {
      const Eigen::Index c = static_cast<Eigen::Index>(r) * samples + i;
      const double u = jitter ? static_cast<double>(jitter[c]) : 0.5;
      const double t = near[r] + (i + u) * bin;
      if (i > 0) m.delta[c - 1] = static_cast<S>(t - prev);
      prev = t;
      m.pos.col(c) = (origin[r] + t * direction[r]).cast<S>();
      m.dir.col(c) = d;
    }
    m.delta[static_cast<size_t>(r) * samples + samples - 1] = static_cast<S>(far[r] - prev);
  }
  field.forward(m.pos, m.dir, m.cache);

  m.color.resize(3, static_cast<Eigen::Index>(rays));
  m.opacity.resize(rays);
  const Eigen::Matrix<S, 3, 1> bg = background.cast<S>();
  for (size_t r = 0; r < rays; ++r) {
    S trans = S(1);
    Eigen::Matrix<S, 3, 1> acc = Eigen::Matrix<S, 3, 1>::Zero();
    for (int i = 0; i < samples; ++i) {
      const Eigen::Index c = static_cast<Eigen::Index>(r) * samples + i;
      const S next = trans * std::exp(-m.cache.sigma(c) * m.delta[c]);
      acc += (trans - next) * m.cache.rgb.col(c);
      trans = next;
    }
    m.color.col(static_cast<Eigen::Index>(r)) = acc + trans * bg;
    m.opacity[r] = S(1) - trans;
  }
}

// Accumulates the parameter gradient given dL/dcolor per ray (3 x rays).
template <typename S>
void march_backward(const RadianceField<S>& field, const March<S>& m,
                    const Eigen::Matrix<S, 3, Eigen::Dynamic>& d_color, const Vec3& background, std::span<S> grad) {
  const Eigen::Index rays = m.color.cols();
  const int samples = m.samples;
  const Eigen::Index n = rays * samples;
  Eigen::Matrix<S, 1, Eigen::Dynamic> d_sigma(n);
  Eigen::Matrix<S, 3, Eigen::Dynamic> d_rgb(3, n);
  std::vector<S> trans_after(samples);
  std::vector<S> weight(samples);
  for (Eigen::Index r = 0; r < rays; ++r) {
    const Eigen::Index c0 = r * samples;
    S trans = S(1);
    for (int i = 0; i < samples; ++i) {
      const S next = trans * std::exp(-m.cache.sigma(c0 + i) * m.delta[c0 + i]);
      weight[i] = trans - next;
      trans_after[i] = next;
      trans = next;
    }
    // suffix = sum_{i>k} w_i c_i + T_N * background
    Eigen::Matrix<S, 3, 1> suffix = trans * background.cast<S>();
    const Eigen::Matrix<S, 3, 1> dc = d_color.col(r);
    for (int k = samples - 1; k >= 0; --k) {
      const Eigen::Index c = c0 + k;
      const Eigen::Matrix<S, 3, 1> ck = m.cache.rgb.col(c);
      d_sigma(c) = m.delta[c] * dc.dot(trans_after[k] * ck - suffix);
      d_rgb.col(c) = weight[k] * dc;
      suffix += weight[k] * ck;
    }
  }
  field.backward(m.cache, d_sigma, d_rgb, grad);
}

}  // namespace dronerf::nerf::detail
