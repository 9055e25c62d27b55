#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "dronerf/camera_io.hpp"
#include "dronerf/errors.hpp"
#include "dronerf/pipeline.hpp"

namespace dronerf::pipeline {

std::string arm_name(Arm arm) { return arm == Arm::kBaseline ? "baseline" : "dronerf"; }
std::string arm_label(Arm arm) { return arm == Arm::kBaseline ? "standard" : "optimized"; }

Arm parse_arm(const std::string& name) {
  if (name == "baseline" || name == "standard") return Arm::kBaseline;
  if (name == "dronerf" || name == "optimized") return Arm::kDronerf;
  throw ConfigError("unknown arm '" + name + "' (expected baseline or dronerf)");
}

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() || base.empty() ? p : base / p; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!scene.empty(), "scene name is empty");
  require(fs::exists(mesh), "mesh file not found: " + mesh.string());
  require(drones >= 1, "drones must be >= 1");
  try {
    intrinsics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("intrinsics: ") + e.what());
  }
  require(seed_views.distance_factor > 0.0, "seed_views.distance_factor must be positive");
  require(seed_views.options.near > 0.0, "seed_views.near must be positive");
  require(seed_views.options.sigmas_per_octave >= 1, "seed_views.sigmas_per_octave must be >= 1");

  const auto positive = [](const std::vector<double>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  };
  require(positive(placement.radius_factors), "placement.radius_factors must be non-empty and positive");
  require(!placement.height_offsets.empty(), "placement.height_offsets is empty");
  require(placement.azimuths >= 1, "placement.azimuths must be >= 1");
  require(placement.ring_radius_factor > 0.0, "placement.ring_radius_factor must be positive");
  const size_t d = placement.radius_factors.size() * placement.height_offsets.size() * placement.azimuths;
  require(d >= static_cast<size_t>(drones), "candidate set smaller than the drone count");
  placement.annealing.validate();

  capture.schedule.validate();
  capture.servo.validate();
  require(capture.arrival_noise_m >= 0.0 && capture.arrival_noise_rad >= 0.0, "arrival noise must be >= 0");
  const int images = drones * capture.schedule.iterations * capture.schedule.images_per_stop;
  require(images >= 2, "the capture schedule yields fewer than 2 images");

  field.grid.validate();
  require(field.grid.aux_dims == 3, "field.grid.aux_dims must be 3");
  require(field.mlp.hidden >= 1 && field.mlp.geo_features >= 1, "invalid MLP widths");
  require(train.iterations >= 0 && train.warmup_iterations >= 0 && train.batch_rays >= 1 && train.samples >= 1 && train.chunk_rays >= 1,
          "invalid training sizes");
  require(train.learning_rate > 0.0 && train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 &&
              train.beta2 < 1.0 && train.epsilon > 0.0,
          "invalid optimizer settings");

  require(eval.holdout_fraction > 0.0 && eval.holdout_fraction < 1.0, "holdout_fraction must lie in (0, 1)");
  const int test = std::max(1, static_cast<int>(std::lround(eval.holdout_fraction * images)));
  require(test < images, "holdout split leaves no training images");
  require(!eval.elevations_deg.empty(), "evaluation.elevations_deg is empty");
  for (double e : eval.elevations_deg) require(std::abs(e) < 90.0, "elevations must lie in (-90, 90)");
  require(eval.azimuths >= 1, "evaluation.azimuths must be >= 1");
  require(eval.distance_factor > 0.0, "evaluation.distance_factor must be positive");
  require(eval.render.samples >= 1 && eval.render.chunk_rays >= 1, "invalid render sizes");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json capture = c.capture;
  capture.erase("intrinsics");
  nlohmann::json annealing = c.placement.annealing;
  annealing.erase("seed");
  return {
      {"scene", {{"name", c.scene}, {"mesh", c.mesh.string()}}},
      {"drones", c.drones},
      {"seed", c.seed},
      {"intrinsics", intrinsics_to_json(c.intrinsics)},
      {"seed_views",
       {{"distance_factor", c.seed_views.distance_factor},
        {"margin_px", c.seed_views.options.margin_px},
        {"near", c.seed_views.options.near},
        {"sigmas_per_octave", c.seed_views.options.sigmas_per_octave},
        {"blob_threshold", c.seed_views.options.blobs.threshold}}},
      {"placement",
       {{"radius_factors", c.placement.radius_factors},
        {"height_offsets", c.placement.height_offsets},
        {"azimuths", c.placement.azimuths},
        {"ring_radius_factor", c.placement.ring_radius_factor},
        {"fitness", {{"visibility", c.placement.weights.visibility}, {"reprojection", c.placement.weights.reprojection}}},
        {"annealing", annealing}}},
      {"capture", capture},
      {"nerf",
       {{"field", c.field},
        {"train", c.train}}},
      {"evaluation",
       {{"holdout_fraction", c.eval.holdout_fraction},
        {"elevations_deg", c.eval.elevations_deg},
        {"azimuths", c.eval.azimuths},
        {"azimuth_offset_deg", c.eval.azimuth_offset_deg},
        {"distance_factor", c.eval.distance_factor},
        {"samples", c.eval.render.samples},
        {"chunk_rays", c.eval.render.chunk_rays},
        {"grayscale_ssim", c.eval.grayscale_ssim}}},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    check_keys(j, {"scene", "drones", "seed", "output_dir", "intrinsics", "seed_views", "placement", "capture", "nerf",
                   "evaluation"},
               "config");
    require(j.contains("scene"), "config needs a scene");
    const auto& scene = j.at("scene");
    check_keys(scene, {"name", "mesh"}, "scene");
    c.scene = scene.at("name").get<std::string>();
    c.mesh = resolve(scene.at("mesh").get<std::string>(), base_dir);
    c.drones = j.value("drones", c.drones);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j.at("intrinsics"));

    if (j.contains("seed_views")) {
      const auto& s = j.at("seed_views");
      check_keys(s, {"distance_factor", "margin_px", "near", "sigmas_per_octave", "blob_threshold"}, "seed_views");
      c.seed_views.distance_factor = s.value("distance_factor", c.seed_views.distance_factor);
      c.seed_views.options.margin_px = s.value("margin_px", c.seed_views.options.margin_px);
      c.seed_views.options.near = s.value("near", c.seed_views.options.near);
      c.seed_views.options.sigmas_per_octave = s.value("sigmas_per_octave", c.seed_views.options.sigmas_per_octave);
      c.seed_views.options.blobs.threshold = s.value("blob_threshold", c.seed_views.options.blobs.threshold);
    }
    if (j.contains("placement")) {
      const auto& p = j.at("placement");
      check_keys(p, {"radius_factors", "height_offsets", "azimuths", "ring_radius_factor", "fitness", "annealing"},
                 "placement");
      auto& pc = c.placement;
      if (p.contains("radius_factors")) pc.radius_factors = p.at("radius_factors").get<std::vector<double>>();
      if (p.contains("height_offsets")) pc.height_offsets = p.at("height_offsets").get<std::vector<double>>();
      pc.azimuths = p.value("azimuths", pc.azimuths);
      pc.ring_radius_factor = p.value("ring_radius_factor", pc.ring_radius_factor);
      if (p.contains("fitness")) {
        const auto& f = p.at("fitness");
        check_keys(f, {"visibility", "reprojection"}, "placement.fitness");
        pc.weights.visibility = f.value("visibility", pc.weights.visibility);
        pc.weights.reprojection = f.value("reprojection", pc.weights.reprojection);
      }
      if (p.contains("annealing")) {
        check_keys(p.at("annealing"),
                   {"initial_temperature", "calibration_samples", "cooling", "iterations_per_temperature", "iterations"},
                   "placement.annealing");
        pc.annealing = p.at("annealing").get<AnnealingSchedule>();
      }
    }
    if (j.contains("capture")) {
      check_keys(j.at("capture"),
                 {"iterations", "delta_angle", "images_per_stop", "servo", "arrival_noise_m", "arrival_noise_rad"},
                 "capture");
      c.capture = j.at("capture").get<CaptureConfig>();
    }
    if (j.contains("nerf")) {
      const auto& n = j.at("nerf");
      check_keys(n, {"field", "train"}, "nerf");
      if (n.contains("field")) c.field = n.at("field").get<nerf::FieldConfig>();
      if (n.contains("train")) c.train = n.at("train").get<nerf::TrainConfig>();
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, {"holdout_fraction", "elevations_deg", "azimuths", "azimuth_offset_deg", "distance_factor", "samples",
                     "chunk_rays", "grayscale_ssim"},
                 "evaluation");
      c.eval.holdout_fraction = e.value("holdout_fraction", c.eval.holdout_fraction);
      if (e.contains("elevations_deg")) c.eval.elevations_deg = e.at("elevations_deg").get<std::vector<double>>();
      c.eval.azimuths = e.value("azimuths", c.eval.azimuths);
      c.eval.azimuth_offset_deg = e.value("azimuth_offset_deg", c.eval.azimuth_offset_deg);
      c.eval.distance_factor = e.value("distance_factor", c.eval.distance_factor);
      c.eval.render.samples = e.value("samples", c.eval.render.samples);
      c.eval.render.chunk_rays = e.value("chunk_rays", c.eval.render.chunk_rays);
      c.eval.grayscale_ssim = e.value("grayscale_ssim", c.eval.grayscale_ssim);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.capture.intrinsics = c.intrinsics;
  c.eval.render.background = c.train.background;
  c.placement.annealing.seed = c.seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

HoldoutSplit split_holdout(int count, double fraction, uint64_t seed) {
  if (count < 2) throw std::invalid_argument("holdout split needs at least 2 items");
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in (0, 1)");
  const int test = std::max(1, static_cast<int>(std::lround(fraction * count)));
  if (test >= count) throw std::invalid_argument("holdout fraction leaves no training items");
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  HoldoutSplit s;
  s.test.assign(order.begin(), order.begin() + test);
  s.train.assign(order.begin() + test, order.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

uint64_t stage_seed(uint64_t seed, const std::string& stage) {
  std::vector<uint32_t> words = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  for (unsigned char ch : stage) words.push_back(ch);
  std::seed_seq seq(words.begin(), words.end());
  uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<uint64_t>(out[0]) << 32) | out[1];
}

std::vector<CameraRig> novel_views(const Intrinsics& intrinsics, const Vec3& center, double distance,
                                   const EvalConfig& eval) {
  std::vector<CameraRig> out;
  const double deg = std::acos(-1.0) / 180.0;
  for (double elevation : eval.elevations_deg) {
    for (int a = 0; a < eval.azimuths; ++a) {
      const double az = (eval.azimuth_offset_deg + 360.0 * a / eval.azimuths) * deg;
      const double el = elevation * deg;
      const Vec3 eye = center + distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      out.push_back(CameraRig::look_at(intrinsics, eye, center));
    }
  }
  return out;
}

}  // namespace dronerf::pipeline
