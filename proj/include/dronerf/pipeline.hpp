#pragma once

// Experiment orchestration: seed snapshots, baseline ring and optimized
// placements, capture, training, evaluation, comparison and the run manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronerf/control.hpp"
#include "dronerf/metrics.hpp"
#include "dronerf/nerf.hpp"
#include "dronerf/placement.hpp"

namespace dronerf::pipeline {

namespace fs = std::filesystem;

enum class Arm { kBaseline, kDronerf };

inline constexpr Arm kArms[] = {Arm::kBaseline, Arm::kDronerf};

std::string arm_name(Arm arm);   // directory name: "baseline" | "dronerf"
std::string arm_label(Arm arm);  // report label: "standard" | "optimized"
Arm parse_arm(const std::string& name);

struct SeedViewConfig {
  double distance_factor = 2.0;  // snapshot distance, x mesh bounds largest extent
  SeedOptions options;
};

struct PlacementConfig {
  std::vector<double> radius_factors = {1.3, 1.8};     // x seed box largest extent
  std::vector<double> height_offsets = {0.0, 0.5, 1.0};  // x seed box height, above its center
  int azimuths = 12;
  double ring_radius_factor = 1.3;  // baseline ring, x seed box largest extent
  FitnessWeights weights;
  AnnealingSchedule annealing;  // seed is taken from the experiment seed
};

struct EvalConfig {
  double holdout_fraction = 0.2;
  std::vector<double> elevations_deg = {0.0, 25.0, 45.0};
  int azimuths = 4;
  double azimuth_offset_deg = 22.5;
  double distance_factor = 1.6;  // x seed box largest extent
  nerf::RenderConfig render;
  bool grayscale_ssim = false;
};

struct ExperimentConfig {
  std::string scene;
  fs::path mesh;
  int drones = 4;
  uint64_t seed = 0;
  fs::path output_dir = "runs/default";
  Intrinsics intrinsics;
  SeedViewConfig seed_views;
  PlacementConfig placement;
  CaptureConfig capture;  // intrinsics mirror the experiment intrinsics
  nerf::FieldConfig field;
  nerf::TrainConfig train;
  EvalConfig eval;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Relative mesh and output paths resolve against `base_dir`. Unknown keys
// and type mismatches throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir = {});
// JSON with // and /* */ comments.
ExperimentConfig load_config(const fs::path& path);

struct HoldoutSplit {
  std::vector<int> train;
  std::vector<int> test;  // both sorted
};

// Seeded shuffle of [0, count); round(fraction * count) test items, at
// least one. Throws std::invalid_argument for fewer than 2 items, a fraction
// outside (0, 1) or an empty train set.
HoldoutSplit split_holdout(int count, double fraction, uint64_t seed);

// Independent seed for a named stage derived from the experiment seed.
uint64_t stage_seed(uint64_t seed, const std::string& stage);

// Ground-truth novel viewpoints around `center`, ordered by elevation then azimuth.
std::vector<CameraRig> novel_views(const Intrinsics& intrinsics, const Vec3& center, double distance,
                                   const EvalConfig& eval);

// Everything the stages share, loaded once per command.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const fs::path& root() const { return cfg_.output_dir; }
  fs::path arm_dir(Arm arm) const { return root() / arm_name(arm); }

  // Each stage runs its missing prerequisites first and rewrites its own
  // outputs. Failures surface as StageError naming the stage; ConfigError
  // passes through untouched.
  void seed_stage();
  void optimize(Arm arm);
  void capture(Arm arm);
  void train(Arm arm);
  void evaluate(Arm arm);
  void compare();
  void run_all(const std::vector<Arm>& arms);

  // Hashes every file under the run directory except the manifest and the
  // timing log; see manifest.json.
  nlohmann::json write_manifest();

  const TriangleMesh& mesh();
  SeedGeometry seed_geometry();

 private:
  template <typename F>
  void stage(const std::string& name, F&& body);
  bool done(const fs::path& marker) const { return fs::exists(root() / marker); }

  ExperimentConfig cfg_;
  std::optional<TriangleMesh> mesh_;
  std::map<std::string, double> timings_;
};

std::string sha256_file(const fs::path& path);

}  // namespace dronerf::pipeline
