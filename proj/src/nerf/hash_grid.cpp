#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dronerf/errors.hpp"
#include "dronerf/nerf.hpp"

namespace dronerf::nerf {

namespace {

constexpr uint32_t kPrimes[3] = {1u, 2654435761u, 805459861u};

bool is_dense(int resolution, const HashGridConfig& cfg) {
  const uint64_t side = static_cast<uint64_t>(resolution) + 1;
  return side * side * side <= cfg.table_size();
}

uint32_t index_for(const std::array<uint32_t, 3>& c, int resolution, bool dense, uint32_t table_size) {
  if (dense) {
    const uint32_t side = static_cast<uint32_t>(resolution) + 1;
    return c[0] + side * (c[1] + side * c[2]);
  }
  return ((c[0] * kPrimes[0]) ^ (c[1] * kPrimes[1]) ^ (c[2] * kPrimes[2])) & (table_size - 1);
}

}  // namespace

void HashGridConfig::validate() const {
  if (levels < 2) throw ConfigError("hash grid needs at least 2 levels");
  if (log2_table_size < 1 || log2_table_size > 30) throw ConfigError("log2_table_size out of range");
  if (features < 1) throw ConfigError("features per entry must be >= 1");
  if (min_resolution < 1 || !(min_resolution < max_resolution)) {
    throw ConfigError("need 1 <= min_resolution < max_resolution");
  }
  if (aux_dims < 0) throw ConfigError("aux_dims must be >= 0");
  const auto res = level_resolutions(*this);
  for (size_t l = 1; l < res.size(); ++l) {
    if (res[l] <= res[l - 1]) throw ConfigError("too many levels for the resolution range");
  }
}

std::vector<int> level_resolutions(const HashGridConfig& cfg) {
  const double b = std::exp((std::log(cfg.max_resolution) - std::log(cfg.min_resolution)) / (cfg.levels - 1));
  std::vector<int> out(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l) {
    // The epsilon keeps exact powers (16 * 2^3) from flooring to one below.
    out[l] = static_cast<int>(std::floor(cfg.min_resolution * std::pow(b, l) + 1e-9));
  }
  out.front() = cfg.min_resolution;
  out.back() = cfg.max_resolution;
  return out;
}

uint32_t hash_index(const std::array<uint32_t, 3>& corner, int level, const HashGridConfig& cfg) {
  if (level < 0 || level >= cfg.levels) throw std::out_of_range("level out of range");
  const int n = level_resolutions(cfg)[level];
  return index_for(corner, n, is_dense(n, cfg), cfg.table_size());
}

HashGrid::HashGrid(const HashGridConfig& cfg) : cfg_(cfg), resolutions_(level_resolutions(cfg)) {
  cfg_.validate();
  for (int n : resolutions_) dense_.push_back(is_dense(n, cfg_));
}

uint32_t HashGrid::index(const std::array<uint32_t, 3>& corner, int level) const {
  return index_for(corner, resolutions_[level], dense_[level], cfg_.table_size());
}

void HashGrid::corners(const Vec3& x, int level, std::array<uint32_t, 8>& index,
                       std::array<double, 8>& weight) const {
  const int n = resolutions_[level];
  std::array<uint32_t, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double s = x[a] * n;
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
    base[a] = static_cast<uint32_t>(i);
    frac[a] = s - i;
  }
  for (int k = 0; k < 8; ++k) {
    std::array<uint32_t, 3> c{};
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const bool up = (k >> a) & 1;
      c[a] = base[a] + (up ? 1u : 0u);
      w *= up ? frac[a] : 1.0 - frac[a];
    }
    index[k] = index_for(c, n, dense_[level], cfg_.table_size());
    weight[k] = w;
  }
}

template <typename S>
std::vector<S> encode(const Vec3& x, std::span<const S> theta, const HashGridConfig& cfg, std::span<const S> aux,
                      OutOfCube policy, bool* clamped) {
  if (static_cast<int>(aux.size()) != cfg.aux_dims) throw std::invalid_argument("aux length differs from E");
  const size_t table = static_cast<size_t>(cfg.table_size()) * cfg.features;
  if (theta.size() < table * cfg.levels) throw std::invalid_argument("theta too small for the grid");
  const Vec3 inside = x.cwiseMax(0.0).cwiseMin(1.0);
  const bool outside = inside != x;
  if (outside && policy == OutOfCube::kThrow) throw std::out_of_range("position outside the unit cube");
  if (clamped) *clamped = outside;

  const HashGrid grid(cfg);
  std::vector<S> out(static_cast<size_t>(cfg.encoded_dims()) + aux.size(), S(0));
  std::array<uint32_t, 8> idx{};
  std::array<double, 8> w{};
  for (int l = 0; l < cfg.levels; ++l) {
    grid.corners(inside, l, idx, w);
    const S* level = theta.data() + table * l;
    for (int k = 0; k < 8; ++k) {
      for (int f = 0; f < cfg.features; ++f) {
        out[l * cfg.features + f] += static_cast<S>(w[k]) * level[static_cast<size_t>(idx[k]) * cfg.features + f];
      }
    }
  }
  std::copy(aux.begin(), aux.end(), out.begin() + cfg.encoded_dims());
  return out;
}

template std::vector<float> encode(const Vec3&, std::span<const float>, const HashGridConfig&,
                                   std::span<const float>, OutOfCube, bool*);
template std::vector<double> encode(const Vec3&, std::span<const double>, const HashGridConfig&,
                                    std::span<const double>, OutOfCube, bool*);

void to_json(nlohmann::json& j, const HashGridConfig& c) {
  j = {{"levels", c.levels},
       {"log2_table_size", c.log2_table_size},
       {"features", c.features},
       {"min_resolution", c.min_resolution},
       {"max_resolution", c.max_resolution},
       {"aux_dims", c.aux_dims}};
}

void from_json(const nlohmann::json& j, HashGridConfig& c) {
  c.levels = j.value("levels", c.levels);
  c.log2_table_size = j.value("log2_table_size", c.log2_table_size);
  c.features = j.value("features", c.features);
  c.min_resolution = j.value("min_resolution", c.min_resolution);
  c.max_resolution = j.value("max_resolution", c.max_resolution);
  c.aux_dims = j.value("aux_dims", c.aux_dims);
}

void to_json(nlohmann::json& j, const MlpConfig& c) { j = {{"hidden", c.hidden}, {"geo_features", c.geo_features}}; }

void from_json(const nlohmann::json& j, MlpConfig& c) {
  c.hidden = j.value("hidden", c.hidden);
  c.geo_features = j.value("geo_features", c.geo_features);
}

void to_json(nlohmann::json& j, const FieldConfig& c) { j = {{"grid", c.grid}, {"mlp", c.mlp}}; }

void from_json(const nlohmann::json& j, FieldConfig& c) {
  if (j.contains("grid")) c.grid = j.at("grid").get<HashGridConfig>();
  if (j.contains("mlp")) c.mlp = j.at("mlp").get<MlpConfig>();
}

}  // namespace dronerf::nerf
