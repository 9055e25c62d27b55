#include <cmath>
#include <stdexcept>

#include "dronerf/errors.hpp"
#include "dronerf/nerf.hpp"

namespace dronerf::nerf {

namespace {

template <typename S>
using DMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using MapM = Eigen::Map<DMat<S>>;
template <typename S>
using CMapM = Eigen::Map<const DMat<S>>;
template <typename S>
using CMapV = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;
template <typename S>
using MapV = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;

template <typename S>
S density_activation(S o) {
  return o > S(0) ? o + S(1) : std::exp(o);
}

template <typename S>
S density_slope(S o) {
  return o > S(0) ? S(1) : std::exp(o);
}

template <typename S>
S logistic(S z) {
  return S(1) / (S(1) + std::exp(-z));
}

}  // namespace

ParamLayout::ParamLayout(const FieldConfig& cfg) {
  const auto& g = cfg.grid;
  in = g.encoded_dims();
  hidden = cfg.mlp.hidden;
  out1 = 1 + cfg.mlp.geo_features;
  in2 = cfg.mlp.geo_features + g.aux_dims;
  size_t at = 0;
  auto take = [&](size_t n) {
    const size_t start = at;
    at += n;
    return start;
  };
  grid = take(static_cast<size_t>(g.levels) * g.table_size() * g.features);
  w1 = take(static_cast<size_t>(hidden) * in);
  b1 = take(hidden);
  w2 = take(static_cast<size_t>(out1) * hidden);
  b2 = take(out1);
  w3 = take(static_cast<size_t>(hidden) * in2);
  b3 = take(hidden);
  w4 = take(3 * static_cast<size_t>(hidden));
  b4 = take(3);
  total = at;
}

template <typename S>
RadianceField<S>::RadianceField(const FieldConfig& cfg, uint64_t seed)
    : cfg_(cfg), layout_(cfg), grid_(cfg.grid), params_(layout_.total, S(0)) {
  if (cfg.grid.aux_dims != 3) throw ConfigError("the field expects a 3-component view direction (aux_dims = 3)");
  if (cfg.mlp.hidden < 1 || cfg.mlp.geo_features < 0) throw ConfigError("invalid MLP size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tiny(-1e-4, 1e-4);
  for (size_t i = layout_.grid; i < layout_.w1; ++i) params_[i] = static_cast<S>(tiny(rng));
  auto glorot = [&](size_t offset, int fan_out, int fan_in) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (size_t i = 0; i < static_cast<size_t>(fan_out) * fan_in; ++i) params_[offset + i] = static_cast<S>(u(rng));
  };
  glorot(layout_.w1, layout_.hidden, layout_.in);
  glorot(layout_.w2, layout_.out1, layout_.hidden);
  glorot(layout_.w3, layout_.hidden, layout_.in2);
}

template <typename S>
RadianceField<S>::RadianceField(const FieldConfig& cfg, std::vector<S> params)
    : cfg_(cfg), layout_(cfg), grid_(cfg.grid), params_(params.begin(), params.end()) {
  if (cfg.grid.aux_dims != 3) throw ConfigError("the field expects a 3-component view direction (aux_dims = 3)");
  if (params_.size() != layout_.total) throw std::invalid_argument("parameter vector has the wrong length");
}

template <typename S>
FieldSample<S> RadianceField<S>::eval(const Vec3& x, const Vec3& dir) const {
  const ParamLayout& p = layout_;
  const S* w = params_.data();
  const std::array<S, 3> d{static_cast<S>(dir.x()), static_cast<S>(dir.y()), static_cast<S>(dir.z())};
  const std::vector<S> enc = encode<S>(x, params_, cfg_.grid, d);

  std::vector<S> h1(p.hidden);
  for (int r = 0; r < p.hidden; ++r) {
    S acc = w[p.b1 + r];
    for (int c = 0; c < p.in; ++c) acc += w[p.w1 + static_cast<size_t>(c) * p.hidden + r] * enc[c];
    h1[r] = std::max(acc, S(0));
  }
  std::vector<S> o(p.out1);
  for (int r = 0; r < p.out1; ++r) {
    S acc = w[p.b2 + r];
    for (int c = 0; c < p.hidden; ++c) acc += w[p.w2 + static_cast<size_t>(c) * p.out1 + r] * h1[c];
    o[r] = acc;
  }
  std::vector<S> cin(p.in2);
  for (int i = 1; i < p.out1; ++i) cin[i - 1] = o[i];
  for (int i = 0; i < 3; ++i) cin[p.out1 - 1 + i] = enc[p.in + i];
  std::vector<S> h2(p.hidden);
  for (int r = 0; r < p.hidden; ++r) {
    S acc = w[p.b3 + r];
    for (int c = 0; c < p.in2; ++c) acc += w[p.w3 + static_cast<size_t>(c) * p.hidden + r] * cin[c];
    h2[r] = std::max(acc, S(0));
  }
  FieldSample<S> out;
  out.density = density_activation(o[0]);
  for (int r = 0; r < 3; ++r) {
    S acc = w[p.b4 + r];
    for (int c = 0; c < p.hidden; ++c) acc += w[p.w4 + static_cast<size_t>(c) * 3 + r] * h2[c];
    out.color[r] = logistic(acc);
  }
  return out;
}

template <typename S>
void RadianceField<S>::forward(const Eigen::Matrix<S, 3, Eigen::Dynamic>& pos,
                               const Eigen::Matrix<S, 3, Eigen::Dynamic>& dir, BatchCache<S>& cache) const {
  const ParamLayout& p = layout_;
  const auto& g = cfg_.grid;
  const Eigen::Index n = pos.cols();
  const S* w = params_.data();
  const size_t table = static_cast<size_t>(g.table_size()) * g.features;

  cache.slots.resize(static_cast<size_t>(n) * g.levels * 8);
  cache.weights.resize(cache.slots.size());
  cache.y.setZero(p.in, n);
  std::array<uint32_t, 8> idx{};
  std::array<double, 8> wt{};
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vec3 x = pos.col(s).template cast<double>().cwiseMax(0.0).cwiseMin(1.0);
    for (int l = 0; l < g.levels; ++l) {
      grid_.corners(x, l, idx, wt);
      const size_t base = (static_cast<size_t>(s) * g.levels + l) * 8;
      const S* level = w + p.grid + table * l;
      for (int k = 0; k < 8; ++k) {
        cache.slots[base + k] = idx[k];
        cache.weights[base + k] = static_cast<S>(wt[k]);
        const S* entry = level + static_cast<size_t>(idx[k]) * g.features;
        for (int f = 0; f < g.features; ++f) cache.y(l * g.features + f, s) += static_cast<S>(wt[k]) * entry[f];
      }
    }
  }

  const CMapM<S> W1(w + p.w1, p.hidden, p.in);
  const CMapV<S> b1(w + p.b1, p.hidden);
  const CMapM<S> W2(w + p.w2, p.out1, p.hidden);
  const CMapV<S> b2(w + p.b2, p.out1);
  const CMapM<S> W3(w + p.w3, p.hidden, p.in2);
  const CMapV<S> b3(w + p.b3, p.hidden);
  const CMapM<S> W4(w + p.w4, 3, p.hidden);
  const CMapV<S> b4(w + p.b4, 3);

  cache.z1.noalias() = W1 * cache.y;
  cache.z1.colwise() += b1;
  cache.a1 = cache.z1.cwiseMax(S(0));
  cache.o.noalias() = W2 * cache.a1;
  cache.o.colwise() += b2;
  cache.sigma.resize(n);
  for (Eigen::Index s = 0; s < n; ++s) cache.sigma(s) = density_activation(cache.o(0, s));

  cache.cin.resize(p.in2, n);
  cache.cin.topRows(p.out1 - 1) = cache.o.bottomRows(p.out1 - 1);
  cache.cin.bottomRows(3) = dir;
  cache.z3.noalias() = W3 * cache.cin;
  cache.z3.colwise() += b3;
  cache.a3 = cache.z3.cwiseMax(S(0));
  cache.rgb.noalias() = W4 * cache.a3;
  cache.rgb.colwise() += b4;
  cache.rgb = cache.rgb.unaryExpr([](S z) { return logistic(z); });
}

template <typename S>
void RadianceField<S>::backward(const BatchCache<S>& cache, const Eigen::Matrix<S, 1, Eigen::Dynamic>& d_sigma,
                                const Eigen::Matrix<S, 3, Eigen::Dynamic>& d_rgb, std::span<S> grad) const {
  const ParamLayout& p = layout_;
  const auto& g = cfg_.grid;
  if (grad.size() != p.total) throw std::invalid_argument("gradient buffer has the wrong length");
  const Eigen::Index n = cache.y.cols();
  const S* w = params_.data();
  S* gw = grad.data();

  const CMapM<S> W2(w + p.w2, p.out1, p.hidden);
  const CMapM<S> W3(w + p.w3, p.hidden, p.in2);
  const CMapM<S> W4(w + p.w4, 3, p.hidden);
  const CMapM<S> W1(w + p.w1, p.hidden, p.in);

  const Mat dz4 = d_rgb.cwiseProduct(cache.rgb.cwiseProduct((S(1) - cache.rgb.array()).matrix()));
  MapM<S>(gw + p.w4, 3, p.hidden).noalias() += dz4 * cache.a3.transpose();
  MapV<S>(gw + p.b4, 3) += dz4.rowwise().sum();

  Mat dz3 = W4.transpose() * dz4;
  dz3 = (cache.z3.array() > S(0)).select(dz3, S(0));
  MapM<S>(gw + p.w3, p.hidden, p.in2).noalias() += dz3 * cache.cin.transpose();
  MapV<S>(gw + p.b3, p.hidden) += dz3.rowwise().sum();

  const Mat dcin = W3.transpose() * dz3;
  Mat d_o(p.out1, n);
  d_o.bottomRows(p.out1 - 1) = dcin.topRows(p.out1 - 1);
  for (Eigen::Index s = 0; s < n; ++s) d_o(0, s) = d_sigma(s) * density_slope(cache.o(0, s));
  MapM<S>(gw + p.w2, p.out1, p.hidden).noalias() += d_o * cache.a1.transpose();
  MapV<S>(gw + p.b2, p.out1) += d_o.rowwise().sum();

  Mat dz1 = W2.transpose() * d_o;
  dz1 = (cache.z1.array() > S(0)).select(dz1, S(0));
  MapM<S>(gw + p.w1, p.hidden, p.in).noalias() += dz1 * cache.y.transpose();
  MapV<S>(gw + p.b1, p.hidden) += dz1.rowwise().sum();

  const Mat dy = W1.transpose() * dz1;
  const size_t table = static_cast<size_t>(g.table_size()) * g.features;
  for (Eigen::Index s = 0; s < n; ++s) {
    for (int l = 0; l < g.levels; ++l) {
      const size_t base = (static_cast<size_t>(s) * g.levels + l) * 8;
      S* level = gw + p.grid + table * l;
      for (int k = 0; k < 8; ++k) {
        S* entry = level + static_cast<size_t>(cache.slots[base + k]) * g.features;
        const S wk = cache.weights[base + k];
        for (int f = 0; f < g.features; ++f) entry[f] += wk * dy(l * g.features + f, s);
      }
    }
  }
}

template class RadianceField<float>;
template class RadianceField<double>;

}  // namespace dronerf::nerf
