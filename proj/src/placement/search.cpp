#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>

#include "dronerf/errors.hpp"
#include "dronerf/placement.hpp"

namespace dronerf {

namespace {

DroneState drone_from_rig(const CameraRig& rig) {
  const Vec3 f = rig.forward();
  DroneState s;
  s.position = rig.position();
  s.yaw = std::atan2(f.y(), f.x());
  s.tilt = std::asin(std::clamp(-f.z(), -1.0, 1.0));
  return s;
}

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<int> PoseCandidateSet::neighbors(int i) const {
  const int a = i % n_azimuths;
  const int h = (i / n_azimuths) % n_heights;
  const int r = i / (n_azimuths * n_heights);
  std::vector<int> out;
  if (r > 0) out.push_back(index(r - 1, h, a));
  if (r + 1 < n_radii) out.push_back(index(r + 1, h, a));
  if (h > 0) out.push_back(index(r, h - 1, a));
  if (h + 1 < n_heights) out.push_back(index(r, h + 1, a));
  if (n_azimuths > 1) {
    out.push_back(index(r, h, (a + n_azimuths - 1) % n_azimuths));
    if (n_azimuths > 2) out.push_back(index(r, h, (a + 1) % n_azimuths));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PoseCandidateSet build_candidate_set(const Vec3& center, const CandidateGrid& grid, const Intrinsics& intrinsics,
                                     int k) {
  if (grid.radii.empty() || grid.heights.empty() || grid.azimuths < 1) {
    throw ConfigError("candidate grid needs at least one radius, height and azimuth");
  }
  for (double r : grid.radii) {
    if (!(r > 0.0)) throw ConfigError("candidate radii must be positive");
  }
  PoseCandidateSet set;
  set.n_radii = static_cast<int>(grid.radii.size());
  set.n_heights = static_cast<int>(grid.heights.size());
  set.n_azimuths = grid.azimuths;
  if (set.n_radii * set.n_heights * set.n_azimuths < k) {
    throw ConfigError("candidate set has fewer poses than drones");
  }
  for (double r : grid.radii) {
    for (double h : grid.heights) {
      for (int a = 0; a < grid.azimuths; ++a) {
        const double az = grid.azimuth_offset + 2.0 * std::numbers::pi * a / grid.azimuths;
        const Vec3 eye(center.x() + r * std::cos(az), center.y() + r * std::sin(az), h);
        set.poses.push_back(CameraRig::look_at(intrinsics, eye, center));
      }
    }
  }
  return set;
}

void to_json(nlohmann::json& j, const CandidateGrid& g) {
  j = {{"radii", g.radii}, {"heights", g.heights}, {"azimuths", g.azimuths}, {"azimuth_offset", g.azimuth_offset}};
}

void from_json(const nlohmann::json& j, CandidateGrid& g) {
  if (j.contains("radii")) g.radii = j.at("radii").get<std::vector<double>>();
  if (j.contains("heights")) g.heights = j.at("heights").get<std::vector<double>>();
  g.azimuths = j.value("azimuths", g.azimuths);
  g.azimuth_offset = j.value("azimuth_offset", g.azimuth_offset);
}

CameraRig FrameSet::frame(const CameraRig& rig, int i) const {
  if (i == 0) return rig;
  const double theta = i * delta_angle;
  const Mat3 rz = Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 eye = orbit_center + rz * (rig.position() - orbit_center);
  return CameraRig(rig.intrinsics(), eye, rig.world_to_camera() * rz.transpose());
}

AchievedPoses achieve_candidates(const PoseCandidateSet& candidates, const TriangleMesh& mesh, const Aabb& object_box,
                                 const CaptureConfig& capture, uint64_t seed) {
  const int n = candidates.size();
  AchievedPoses out;
  out.poses = candidates.poses;
  out.lost.assign(n, false);
  std::vector<char> lost(n, 0);
  std::vector<std::exception_ptr> failure(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      std::seed_seq seq{seed, static_cast<uint64_t>(i)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, 1.0);
      DroneState start = drone_from_rig(candidates.poses[i]);
      start.position += capture.arrival_noise_m * Vec3(noise(rng), noise(rng), noise(rng));
      start.yaw += capture.arrival_noise_rad * noise(rng);
      const ServoResult r = servo_to_object(start, mesh, candidates.poses[i].intrinsics(), object_box, capture.servo);
      out.poses[i] = r.state.camera(candidates.poses[i].intrinsics());
    } catch (const TargetLostError&) {
      lost[i] = 1;
    } catch (...) {
      failure[i] = std::current_exception();
    }
  }
  for (const auto& f : failure) {
    if (f) std::rethrow_exception(f);
  }
  for (int i = 0; i < n; ++i) out.lost[i] = lost[i] != 0;
  return out;
}

double reprojection_discrepancy(const CameraRig& nominal, const CameraRig& achieved, const SeedGeometry& seed,
                                const FrameSet& frames) {
  const auto faces = seed.faces();
  const Intrinsics& k = nominal.intrinsics();
  const double diagonal = std::hypot(k.width, k.height);
  double total = 0.0;
  for (int i = 0; i < frames.count; ++i) {
    const CameraRig expect = frames.frame(nominal, i);
    const CameraRig real = frames.frame(achieved, i);
    const SeedGeometry::Face* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : faces) {
      if (f.normal.dot(expect.position() - f.centroid) <= 0.0) continue;
      const double d = (expect.position() - f.centroid).norm();
      if (d < best) {
        best = d;
        nearest = &f;
      }
    }
    if (!nearest) {
      total += diagonal;
      continue;
    }
    const auto pe = expect.project(nearest->centroid);
    const auto pr = real.project(nearest->centroid);
    total += (pe && pr) ? (*pe - *pr).norm() : diagonal;
  }
  return total / std::max(1, frames.count);
}

FitnessModel::FitnessModel(const TriangleMesh& mesh, const SeedGeometry& seed, const PoseCandidateSet& candidates,
                           const FrameSet& frames, const FitnessWeights& weights, const AchievedPoses* achieved)
    : triangles_(mesh.triangle_count()), weights_(weights) {
  const int n = candidates.size();
  if (achieved && achieved->poses.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("achieved poses do not match the candidate set");
  }
  const size_t words = (static_cast<size_t>(triangles_) + 63) / 64;
  visible_.assign(n, std::vector<uint64_t>(words, 0));
  discrepancy_.assign(n, 0.0);
  for (int c = 0; c < n; ++c) {
    const CameraRig& real = achieved ? achieved->poses[c] : candidates.poses[c];
    for (int i = 0; i < frames.count; ++i) {
      for (int t : visible_triangles(mesh, frames.frame(real, i))) visible_[c][t / 64] |= uint64_t{1} << (t % 64);
    }
    if (achieved) {
      const double diagonal = std::hypot(real.intrinsics().width, real.intrinsics().height);
      discrepancy_[c] = achieved->lost[c] ? diagonal
                                          : reprojection_discrepancy(candidates.poses[c], real, seed, frames);
    }
  }
}

FitnessTerms FitnessModel::terms(std::span<const int> config) const {
  FitnessTerms t;
  if (config.empty() || triangles_ == 0) return t;
  std::vector<uint64_t> acc(visible_.front().size(), 0);
  std::vector<double> disc;
  disc.reserve(config.size());
  for (int c : config) {
    const auto& bits = visible_.at(c);
    for (size_t w = 0; w < acc.size(); ++w) acc[w] |= bits[w];
    disc.push_back(discrepancy_[c]);
  }
  size_t count = 0;
  for (uint64_t w : acc) count += std::popcount(w);
  t.visibility = static_cast<double>(count) / triangles_;
  // Summation in sorted order keeps the value independent of index order.
  std::sort(disc.begin(), disc.end());
  t.discrepancy = mean(disc);
  t.value = weights_.visibility * t.visibility - weights_.reprojection * t.discrepancy;
  return t;
}

std::vector<int> FitnessModel::candidate_visible(int i) const {
  std::vector<int> out;
  for (int t = 0; t < triangles_; ++t) {
    if ((visible_[i][t / 64] >> (t % 64)) & 1) out.push_back(t);
  }
  return out;
}

Configuration greedy_init(int candidates, int k, const FitnessFn& fitness) {
  if (k < 1 || k > candidates) throw std::invalid_argument("greedy_init needs 1 <= K <= D");
  Configuration cfg;
  std::vector<bool> used(candidates, false);
  double current = 0.0;
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    double best_value = 0.0;
    std::vector<int> trial = cfg.indices;
    trial.push_back(0);
    for (int c = 0; c < candidates; ++c) {
      if (used[c]) continue;
      trial.back() = c;
      const double value = fitness(trial);
      const double gain = step == 0 ? value : value - current;
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
        best_value = value;
      }
    }
    used[best] = true;
    cfg.indices.push_back(best);
    current = best_value;
  }
  cfg.fitness = current;
  return cfg;
}

bool boltzmann_accept(double delta_f, double temperature, std::mt19937_64& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (delta_f >= 0.0) return true;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  return u01(rng) < std::exp(delta_f / temperature);
}

void AnnealingSchedule::validate() const {
  if (!(cooling > 0.0 && cooling < 1.0)) throw ConfigError("cooling factor must lie in (0, 1)");
  if (iterations < 0 || iterations_per_temperature < 1) throw ConfigError("invalid annealing iteration counts");
  if (initial_temperature <= 0.0 && calibration_samples < 2) throw ConfigError("calibration needs >= 2 samples");
}

void to_json(nlohmann::json& j, const AnnealingSchedule& s) {
  j = {{"initial_temperature", s.initial_temperature},
       {"calibration_samples", s.calibration_samples},
       {"cooling", s.cooling},
       {"iterations_per_temperature", s.iterations_per_temperature},
       {"iterations", s.iterations},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, AnnealingSchedule& s) {
  s.initial_temperature = j.value("initial_temperature", s.initial_temperature);
  s.calibration_samples = j.value("calibration_samples", s.calibration_samples);
  s.cooling = j.value("cooling", s.cooling);
  s.iterations_per_temperature = j.value("iterations_per_temperature", s.iterations_per_temperature);
  s.iterations = j.value("iterations", s.iterations);
  s.seed = j.value("seed", s.seed);
}

AnnealingResult simulated_annealing(const Configuration& init, const PoseCandidateSet& candidates,
                                    const FitnessFn& fitness, const AnnealingSchedule& schedule) {
  return simulated_annealing(
      init, candidates.size(), [&](int i) { return candidates.neighbors(i); }, fitness, schedule);
}

AnnealingResult simulated_annealing(const Configuration& init, int candidates,
                                    const std::function<std::vector<int>(int)>& neighbors, const FitnessFn& fitness,
                                    const AnnealingSchedule& schedule) {
  schedule.validate();
  const int k = static_cast<int>(init.indices.size());
  if (k < 1 || k > candidates) throw std::invalid_argument("initial configuration does not fit the candidate set");
  std::mt19937_64 rng(schedule.seed);

  AnnealingResult result;
  result.best.indices = init.indices;
  result.best.fitness = fitness(init.indices);
  if (schedule.iterations == 0 || k == candidates) return result;

  double temperature = schedule.initial_temperature;
  if (temperature <= 0.0) {
    std::vector<int> all(candidates);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> samples;
    for (int s = 0; s < schedule.calibration_samples; ++s) {
      std::shuffle(all.begin(), all.end(), rng);
      samples.push_back(fitness(std::span<const int>(all.data(), k)));
    }
    const double m = mean(samples);
    double var = 0.0;
    for (double v : samples) var += (v - m) * (v - m);
    temperature = std::sqrt(var / (samples.size() - 1));
    if (!(temperature > 0.0)) temperature = 1e-12;
  }
  result.initial_temperature = temperature;

  std::vector<int> current = init.indices;
  double current_f = result.best.fitness;
  std::vector<bool> used(candidates, false);
  for (int c : current) used[c] = true;
  std::uniform_int_distribution<int> pick_slot(0, k - 1);
  std::uniform_int_distribution<int> pick_any(0, candidates - 1);
  std::bernoulli_distribution coin(0.5);

  for (int it = 0; it < schedule.iterations; ++it) {
    const int slot = pick_slot(rng);
    int replacement = -1;
    if (coin(rng)) {
      std::vector<int> options;
      for (int nb : neighbors(current[slot])) {
        if (!used[nb]) options.push_back(nb);
      }
      if (!options.empty()) {
        replacement = options[std::uniform_int_distribution<size_t>(0, options.size() - 1)(rng)];
      }
    }
    if (replacement < 0) {
      do {
        replacement = pick_any(rng);
      } while (used[replacement]);
    }
    std::vector<int> proposal = current;
    proposal[slot] = replacement;
    const double f = fitness(proposal);
    if (boltzmann_accept(f - current_f, temperature, rng)) {
      used[current[slot]] = false;
      used[replacement] = true;
      current = std::move(proposal);
      current_f = f;
      ++result.accepted;
      if (current_f > result.best.fitness) {
        result.best.indices = current;
        result.best.fitness = current_f;
      }
    }
    result.best_history.push_back(result.best.fitness);
    if ((it + 1) % schedule.iterations_per_temperature == 0) temperature *= schedule.cooling;
  }
  return result;
}

}  // namespace dronerf
