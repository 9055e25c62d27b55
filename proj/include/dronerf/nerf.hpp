#pragma once

// Radiance field with a multiresolution hash-grid encoding, a two-head MLP,
// volume rendering, and a photometric training loop.
//
// Field architecture (H = hidden width, G = geometric feature width):
//   y  = encode(x)                          L*F values
//   h1 = relu(W1 y + b1)                    H
//   o  = W2 h1 + b2                         1 + G
//   sigma = elu(o0) + 1                     density, >= 0
//   h2 = relu(W3 [o1..oG, d] + b3)          H, d = unit view direction
//   c  = logistic(W4 h2 + b4)               rgb in [0, 1]

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "dronerf/geometry.hpp"
#include "dronerf/image.hpp"

namespace dronerf::nerf {

struct HashGridConfig {
  int levels = 8;
  int log2_table_size = 14;
  int features = 2;
  int min_resolution = 16;
  int max_resolution = 256;
  int aux_dims = 3;

  uint32_t table_size() const { return uint32_t{1} << log2_table_size; }
  int encoded_dims() const { return levels * features; }
  void validate() const;
};

struct MlpConfig {
  int hidden = 64;
  int geo_features = 15;
};

struct FieldConfig {
  HashGridConfig grid;
  MlpConfig mlp;
};

void to_json(nlohmann::json& j, const HashGridConfig& c);
void from_json(const nlohmann::json& j, HashGridConfig& c);
void to_json(nlohmann::json& j, const MlpConfig& c);
void from_json(const nlohmann::json& j, MlpConfig& c);
void to_json(nlohmann::json& j, const FieldConfig& c);
void from_json(const nlohmann::json& j, FieldConfig& c);

// floor(N_min * b^l) with b = exp((ln N_max - ln N_min) / (L - 1)).
std::vector<int> level_resolutions(const HashGridConfig& cfg);

// Levels whose (N+1)^3 corner lattice fits the table index linearly; coarser
// ones collide-free, finer ones through the XOR-of-primes spatial hash.
uint32_t hash_index(const std::array<uint32_t, 3>& corner, int level, const HashGridConfig& cfg);

class HashGrid {
 public:
  explicit HashGrid(const HashGridConfig& cfg);

  const HashGridConfig& config() const { return cfg_; }
  int resolution(int level) const { return resolutions_[level]; }
  bool dense(int level) const { return dense_[level]; }
  uint32_t index(const std::array<uint32_t, 3>& corner, int level) const;

  // The 8 corner slots and trilinear weights of `x` (unit cube) on `level`.
  void corners(const Vec3& x, int level, std::array<uint32_t, 8>& index, std::array<double, 8>& weight) const;

 private:
  HashGridConfig cfg_;
  std::vector<int> resolutions_;
  std::vector<bool> dense_;
};

enum class OutOfCube { kClamp, kThrow };

// Interpolated features of all levels followed by `aux`; length L*F + E.
// `theta` holds L tables of T entries of F values, level-major.
template <typename S>
std::vector<S> encode(const Vec3& x, std::span<const S> theta, const HashGridConfig& cfg, std::span<const S> aux,
                      OutOfCube policy = OutOfCube::kClamp, bool* clamped = nullptr);

// Offsets of every parameter block inside one flat vector.
struct ParamLayout {
  size_t grid = 0, w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0, w4 = 0, b4 = 0, total = 0;
  int in = 0, hidden = 0, out1 = 0, in2 = 0;

  explicit ParamLayout(const FieldConfig& cfg);
  size_t grid_size() const { return w1 - grid; }
};

template <typename S>
struct FieldSample {
  std::array<S, 3> color{};
  S density = 0;
};

// Per-batch intermediates kept for the backward pass.
template <typename S>
struct BatchCache {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<uint32_t> slots;  // n * L * 8
  std::vector<S> weights;       // n * L * 8
  Mat y, z1, a1, o, cin, z3, a3, rgb;
  Eigen::Matrix<S, 1, Eigen::Dynamic> sigma;
};

template <typename S>
class RadianceField {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  // Hash tables uniform in [-1e-4, 1e-4]; W1..W3 Glorot-uniform; color output
  // layer and all biases zero.
  RadianceField(const FieldConfig& cfg, uint64_t seed);
  RadianceField(const FieldConfig& cfg, std::vector<S> params);

  const FieldConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  const HashGrid& grid() const { return grid_; }
  std::span<S> params() { return params_; }
  std::span<const S> params() const { return params_; }

  // Single sample; positions in the unit cube, dir unit length.
  FieldSample<S> eval(const Vec3& x, const Vec3& dir) const;

  // Batched forward over the columns of `pos` and `dir` (3 x n).
  void forward(const Eigen::Matrix<S, 3, Eigen::Dynamic>& pos, const Eigen::Matrix<S, 3, Eigen::Dynamic>& dir,
               BatchCache<S>& cache) const;
  // Accumulates dL/dparams into `grad` given dL/dsigma (n) and dL/drgb (3 x n).
  void backward(const BatchCache<S>& cache, const Eigen::Matrix<S, 1, Eigen::Dynamic>& d_sigma,
                const Eigen::Matrix<S, 3, Eigen::Dynamic>& d_rgb, std::span<S> grad) const;

 private:
  FieldConfig cfg_;
  ParamLayout layout_;
  HashGrid grid_;
  std::vector<S, Eigen::aligned_allocator<S>> params_;
};

// world <-> unit cube, isotropic.
struct SceneBox {
  Vec3 center = Vec3::Zero();
  double size = 1.0;  // edge length of the cube mapped onto [0,1]^3

  // Cube around `box` dilated by `fraction` of its largest extent.
  static SceneBox around(const Aabb& box, double fraction = 0.1);
  Vec3 to_unit(const Vec3& p) const { return (p - center) / size + Vec3::Constant(0.5); }
  Aabb world_bounds() const { return Aabb{center - Vec3::Constant(0.5 * size), center + Vec3::Constant(0.5 * size)}; }
};

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  std::vector<double> weights;
};

// w_i = T_i (1 - exp(-sigma_i delta_i)), T_i = exp(-sum_{j<i} sigma_j delta_j);
// color = sum w_i c_i + (1 - sum w_i) background.
CompositeResult composite(std::span<const double> sigma, std::span<const Vec3> color,
                          std::span<const double> delta, const Vec3& background);

// Sample depths in [near, far]: bin midpoints, or uniformly jittered inside
// each bin when `rng` is given. Deltas: t_{i+1} - t_i, last one far - t_{n-1}.
void sample_depths(double near, double far, int n, std::mt19937_64* rng, std::vector<double>& t,
                   std::vector<double>& delta);

using FieldFn = std::function<std::pair<Vec3, double>(const Vec3& position, const Vec3& dir)>;

CompositeResult volume_render(const Ray& ray, double near, double far, int n_samples, const FieldFn& field,
                              const Vec3& background, std::mt19937_64* rng = nullptr);

struct RenderConfig {
  int samples = 64;
  Vec3 background = Vec3::Zero();
  int chunk_rays = 256;
};

template <typename S>
RgbImage render_novel_view(const RadianceField<S>& field, const SceneBox& box, const CameraRig& rig,
                           const RenderConfig& cfg = {});

namespace reference {
// Serial per-sample renderer built on RadianceField::eval and volume_render.
template <typename S>
RgbImage render_novel_view(const RadianceField<S>& field, const SceneBox& box, const CameraRig& rig,
                           const RenderConfig& cfg = {});
}  // namespace reference

struct TrainConfig {
  int iterations = 1500;
  int batch_rays = 512;
  int samples = 64;
  double learning_rate = 1e-2;
  int warmup_iterations = 100;  // linear learning-rate ramp from 0
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-10;
  Vec3 background = Vec3::Zero();
  int chunk_rays = 64;  // gradient reduction granularity; fixed for reproducibility
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainingView {
  RgbImage image;
  CameraRig rig;
};

// Rays of every pixel that crosses the scene cube, in unit-cube coordinates.
template <typename S>
struct RaySet {
  std::vector<Vec3> origin;
  std::vector<Vec3> direction;
  std::vector<double> near;
  std::vector<double> far;
  std::vector<std::array<S, 3>> target;

  size_t size() const { return origin.size(); }
};

template <typename S>
RaySet<S> collect_rays(std::span<const TrainingView> views, const SceneBox& box);

// Mean squared photometric error over `rays` (subset given by `ids`) and its
// gradient. `jitter` supplies one uniform number per sample for stratified
// sampling; empty means bin midpoints.
template <typename S>
double loss_and_gradient(const RadianceField<S>& field, const RaySet<S>& rays, std::span<const uint32_t> ids,
                         int samples, const Vec3& background, std::span<const S> jitter, std::span<S> grad,
                         int chunk_rays);

namespace reference {
// Serial loss at bin midpoints through RadianceField::eval and volume_render.
template <typename S>
double photometric_loss(const RadianceField<S>& field, const RaySet<S>& rays, std::span<const uint32_t> ids,
                        int samples, const Vec3& background);
}  // namespace reference

struct TrainResult {
  std::vector<double> loss_history;
};

template <typename S>
TrainResult train(RadianceField<S>& field, std::span<const TrainingView> views, const SceneBox& box,
                  const TrainConfig& cfg, uint64_t seed);

// Versioned binary container: "DRNFCKPT", u32 version, u64 header length,
// JSON header, then the float32 parameter vector (little endian).
struct Checkpoint {
  FieldConfig field;
  SceneBox box;
  nlohmann::json extra;
  std::vector<float> params;
};
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dronerf::nerf
