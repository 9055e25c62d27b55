#pragma once

// Crude object geometry from four orthogonal views, the discrete pose
// candidate grid, the configuration fitness model, and the greedy +
// simulated-annealing configuration search.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronerf/blob.hpp"
#include "dronerf/control.hpp"
#include "dronerf/geometry.hpp"

namespace dronerf {

struct SeedView {
  GrayImage image;
  CameraRig rig;
};

struct SeedOptions {
  double margin_px = 1.0;   // each 2D box grows by this much before back-projection
  double near = 0.05;       // m in front of each camera
  int sigmas_per_octave = 8;
  BlobOptions blobs;
};

// Each view's region box spans a frustum wedge; the box returned is the
// axis-aligned hull of the wedges' intersection. Throws NoRegionError naming
// the view without a region.
SeedGeometry estimate_seed_geometry(std::span<const SeedView> views, const SeedOptions& options = {});

// Four cameras at 90 degree azimuth steps around `center`, all aimed at it.
std::vector<CameraRig> orthogonal_ring(const Intrinsics& intrinsics, const Vec3& center, double radius, double height,
                                       double azimuth0 = 0.0);

struct CandidateGrid {
  std::vector<double> radii;    // horizontal distance to the center, m
  std::vector<double> heights;  // absolute z, m
  int azimuths = 12;
  double azimuth_offset = 0.0;  // rad
};

void to_json(nlohmann::json& j, const CandidateGrid& g);
void from_json(const nlohmann::json& j, CandidateGrid& g);

struct PoseCandidateSet {
  std::vector<CameraRig> poses;
  int n_radii = 0;
  int n_heights = 0;
  int n_azimuths = 0;

  int size() const { return static_cast<int>(poses.size()); }
  int index(int radius, int height, int azimuth) const {
    return (radius * n_heights + height) * n_azimuths + azimuth;
  }
  // Candidates one grid step away along any axis; azimuth wraps around.
  std::vector<int> neighbors(int i) const;
};

// radius x height x azimuth product, every pose aimed at `center`.
// Throws ConfigError when fewer than `k` candidates result.
PoseCandidateSet build_candidate_set(const Vec3& center, const CandidateGrid& grid, const Intrinsics& intrinsics,
                                     int k);

// The capture frames of one configuration: each camera also sees the scene
// from its pose rotated by i * delta_angle about the vertical orbit axis.
struct FrameSet {
  int count = 1;
  double delta_angle = 0.0;
  Vec3 orbit_center = Vec3::Zero();

  CameraRig frame(const CameraRig& rig, int i) const;
};

struct FitnessWeights {
  double visibility = 1.0;
  double reprojection = 0.01;  // per pixel
};

struct FitnessTerms {
  double visibility = 0.0;     // union visible-triangle fraction
  double discrepancy = 0.0;    // mean expected-vs-achieved reprojection, px
  double value = 0.0;
};

// Servo-converged pose for every candidate, starting from the candidate
// perturbed by seeded arrival noise. Candidates whose servo loses the
// target keep their nominal pose and are flagged.
struct AchievedPoses {
  std::vector<CameraRig> poses;
  std::vector<bool> lost;
};
AchievedPoses achieve_candidates(const PoseCandidateSet& candidates, const TriangleMesh& mesh, const Aabb& object_box,
                                 const CaptureConfig& capture, uint64_t seed);

class FitnessModel {
 public:
  // `achieved` defaults to the nominal poses (zero discrepancy).
  FitnessModel(const TriangleMesh& mesh, const SeedGeometry& seed, const PoseCandidateSet& candidates,
               const FrameSet& frames, const FitnessWeights& weights, const AchievedPoses* achieved = nullptr);

  int candidates() const { return static_cast<int>(visible_.size()); }
  FitnessTerms terms(std::span<const int> config) const;
  double operator()(std::span<const int> config) const { return terms(config).value; }

  double candidate_discrepancy(int i) const { return discrepancy_[i]; }
  // Visible triangles (sorted ids) of candidate `i` over all its frames.
  std::vector<int> candidate_visible(int i) const;

 private:
  int triangles_ = 0;
  FitnessWeights weights_;
  std::vector<std::vector<uint64_t>> visible_;  // bitset per candidate
  std::vector<double> discrepancy_;
};

// Per-frame reprojection discrepancy of one candidate: for each frame the
// front-facing seed face nearest the camera is projected under the nominal
// and the achieved pose; a face that fails to project costs the image
// diagonal. Returns the mean over frames.
double reprojection_discrepancy(const CameraRig& nominal, const CameraRig& achieved, const SeedGeometry& seed,
                                const FrameSet& frames);

using FitnessFn = std::function<double(std::span<const int>)>;

struct Configuration {
  std::vector<int> indices;
  double fitness = 0.0;
};

// Adds the candidate with the largest fitness gain until K are chosen; ties
// go to the lowest index.
Configuration greedy_init(int candidates, int k, const FitnessFn& fitness);

bool boltzmann_accept(double delta_f, double temperature, std::mt19937_64& rng);

struct AnnealingSchedule {
  double initial_temperature = 0.0;  // <= 0: fitness std over random configurations
  int calibration_samples = 50;
  double cooling = 0.95;
  int iterations_per_temperature = 20;
  int iterations = 2000;
  uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AnnealingSchedule& s);
void from_json(const nlohmann::json& j, AnnealingSchedule& s);

struct AnnealingResult {
  Configuration best;
  double initial_temperature = 0.0;
  int accepted = 0;
  std::vector<double> best_history;  // best-ever fitness after each iteration
};

// Moves: swap a selected pose for an unselected one, or nudge one to an
// unselected grid neighbor (50/50). Acceptance is against the current
// configuration; the best-ever one is returned.
AnnealingResult simulated_annealing(const Configuration& init, const PoseCandidateSet& candidates,
                                    const FitnessFn& fitness, const AnnealingSchedule& schedule);

// Candidate-set-free variant with an explicit neighbor function.
AnnealingResult simulated_annealing(const Configuration& init, int candidates,
                                    const std::function<std::vector<int>(int)>& neighbors, const FitnessFn& fitness,
                                    const AnnealingSchedule& schedule);

}  // namespace dronerf
