#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "dronerf/camera_io.hpp"
#include "dronerf/errors.hpp"
#include "dronerf/pipeline.hpp"

namespace dronerf::pipeline {

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text_file(path)); }

void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string numbered(const std::string& stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.png", stem.c_str(), i);
  return buf;
}

std::string hex(const unsigned char* data, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += digits[data[i] >> 4];
    s += digits[data[i] & 15];
  }
  return s;
}

std::string sha256_string(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr);
  return hex(md, len);
}

FrameSet frames_for(const ExperimentConfig& cfg, const Vec3& center) {
  const auto& s = cfg.capture.schedule;
  return FrameSet{s.iterations * s.images_per_stop, s.step_for(cfg.drones) / s.images_per_stop, center};
}

double union_visibility(const TriangleMesh& mesh, std::span<const CameraRig> poses, const FrameSet& frames) {
  std::vector<CameraRig> all;
  for (const auto& p : poses) {
    for (int i = 0; i < frames.count; ++i) all.push_back(frames.frame(p, i));
  }
  return coverage_report(mesh, all).union_fraction;
}

double mean_height(std::span<const CameraRig> poses) {
  double h = 0.0;
  for (const auto& p : poses) h += p.position().z();
  return h / static_cast<double>(poses.size());
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  fs::create_directories(root());
  write_json(root() / "config.json", config_to_json(cfg_));
  if (fs::exists(root() / "timings.json")) {
    const auto saved = read_json(root() / "timings.json");
    for (const auto& [k, v] : saved.items()) timings_[k] = v.get<double>();
  }
}

template <typename F>
void Experiment::stage(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(root() / "timings.json", nlohmann::json(timings_));
}

const TriangleMesh& Experiment::mesh() {
  if (!mesh_) mesh_ = load_mesh(cfg_.mesh);
  return *mesh_;
}

void Experiment::seed_stage() {
  stage("seed", [&] {
    const fs::path dir = root() / "seed";
    fresh_dir(dir);
    const Aabb mb = mesh().bounds();
    const auto rigs = orthogonal_ring(cfg_.intrinsics, mb.center(),
                                      cfg_.seed_views.distance_factor * mb.extent().maxCoeff(), mb.center().z());
    std::vector<SeedView> views;
    for (size_t i = 0; i < rigs.size(); ++i) {
      views.push_back({render_shaded(mesh(), rigs[i]), rigs[i]});
      write_png(dir / numbered("view", static_cast<int>(i)), views.back().image);
    }
    const SeedGeometry sg = estimate_seed_geometry(views, cfg_.seed_views.options);
    save_poses(dir / "poses.json", rigs);
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : sg.boxes) boxes.push_back(aabb_to_json(b));
    write_json(dir / "seed_geometry.json", {{"seed", cfg_.seed}, {"boxes", boxes}, {"bounds", aabb_to_json(sg.bounds())}});
  });
}

SeedGeometry Experiment::seed_geometry() {
  if (!done("seed/seed_geometry.json")) seed_stage();
  SeedGeometry sg;
  const auto doc = read_json(root() / "seed/seed_geometry.json");
  for (const auto& b : doc.at("boxes")) sg.boxes.push_back(aabb_from_json(b));
  return sg;
}

void Experiment::optimize(Arm arm) {
  const SeedGeometry sg = seed_geometry();
  stage("optimize (" + arm_name(arm) + ")", [&] {
    const fs::path dir = arm_dir(arm) / "placement";
    fresh_dir(dir);
    const Aabb sb = sg.bounds();
    const Vec3 c = sb.center();
    const double extent = sb.extent().maxCoeff();
    const FrameSet frames = frames_for(cfg_, c);
    std::vector<CameraRig> poses;
    nlohmann::json doc = {{"arm", arm_name(arm)}, {"seed", cfg_.seed}, {"ring_height", c.z()}};

    if (arm == Arm::kBaseline) {
      const double r = cfg_.placement.ring_radius_factor * extent;
      for (int i = 0; i < cfg_.drones; ++i) {
        const double az = 2.0 * std::numbers::pi * i / cfg_.drones;
        const Vec3 eye(c.x() + r * std::cos(az), c.y() + r * std::sin(az), c.z());
        poses.push_back(CameraRig::look_at(cfg_.intrinsics, eye, c));
      }
      doc["ring_radius"] = r;
    } else {
      CandidateGrid grid;
      for (double f : cfg_.placement.radius_factors) grid.radii.push_back(f * extent);
      for (double h : cfg_.placement.height_offsets) grid.heights.push_back(c.z() + h * sb.extent().z());
      grid.azimuths = cfg_.placement.azimuths;
      const PoseCandidateSet cands = build_candidate_set(c, grid, cfg_.intrinsics, cfg_.drones);
      const AchievedPoses achieved =
          achieve_candidates(cands, mesh(), sb, cfg_.capture, stage_seed(cfg_.seed, "achieve"));
      const FitnessModel model(mesh(), sg, cands, frames, cfg_.placement.weights, &achieved);
      const FitnessFn fitness = [&](std::span<const int> s) { return model(s); };
      const Configuration init = greedy_init(cands.size(), cfg_.drones, fitness);
      AnnealingSchedule schedule = cfg_.placement.annealing;
      schedule.seed = stage_seed(cfg_.seed, "anneal");
      const AnnealingResult result = simulated_annealing(init, cands, fitness, schedule);
      for (int i : result.best.indices) poses.push_back(cands.poses[i]);

      const FitnessTerms terms = model.terms(result.best.indices);
      save_poses(dir / "candidates.json", cands.poses);
      nlohmann::json lost = nlohmann::json::array();
      for (bool l : achieved.lost) lost.push_back(l);
      write_json(dir / "achieved.json", {{"poses", poses_to_json(achieved.poses)}, {"lost", lost}});
      std::string csv = "iteration,best_fitness\n";
      for (size_t i = 0; i < result.best_history.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof(line), "%zu,%.17g\n", i + 1, result.best_history[i]);
        csv += line;
      }
      write_text_file(dir / "annealing.csv", csv);
      doc["candidate_grid"] = grid;
      doc["indices"] = result.best.indices;
      doc["fitness"] = result.best.fitness;
      doc["fitness_terms"] = {{"visibility", terms.visibility}, {"discrepancy_px", terms.discrepancy}};
      doc["greedy"] = {{"indices", init.indices}, {"fitness", init.fitness}};
      doc["initial_temperature"] = result.initial_temperature;
      doc["accepted_moves"] = result.accepted;
    }
    doc["mean_height"] = mean_height(poses);
    doc["visibility"] = union_visibility(mesh(), poses, frames);
    save_poses(dir / "start_poses.json", poses);
    write_json(dir / "configuration.json", doc);
  });
}

void Experiment::capture(Arm arm) {
  const SeedGeometry sg = seed_geometry();
  if (!done(arm_name(arm) + "/placement/start_poses.json")) optimize(arm);
  stage("capture (" + arm_name(arm) + ")", [&] {
    const fs::path dir = arm_dir(arm) / "capture";
    fresh_dir(dir);
    const Aabb sb = sg.bounds();
    std::vector<DroneState> drones;
    for (const auto& p : load_poses(arm_dir(arm) / "placement/start_poses.json")) {
      drones.push_back(drone_looking_at(p.position(), sb.center()));
    }
    const auto caps = run_capture(drones, mesh(), sb, cfg_.capture, stage_seed(cfg_.seed, "capture"));
    std::vector<CameraRig> rigs;
    nlohmann::json log = nlohmann::json::array();
    for (size_t i = 0; i < caps.size(); ++i) {
      const auto& c = caps[i];
      write_png(dir / numbered("img", static_cast<int>(i)), c.image);
      rigs.push_back(c.rig);
      log.push_back({{"image", numbered("img", static_cast<int>(i))},
                     {"drone", c.drone},
                     {"iteration", c.iteration},
                     {"converged", c.converged},
                     {"servo_steps", c.servo_steps},
                     {"centroid_error_px", c.centroid_error_px}});
    }
    save_poses(dir / "poses.json", rigs);
    write_json(dir / "captures.json", {{"seed", cfg_.seed}, {"captures", log}});
  });
}

void Experiment::train(Arm arm) {
  const SeedGeometry sg = seed_geometry();
  if (!done(arm_name(arm) + "/capture/poses.json")) capture(arm);
  stage("train (" + arm_name(arm) + ")", [&] {
    const fs::path dir = arm_dir(arm) / "train";
    fresh_dir(dir);
    const auto rigs = load_poses(arm_dir(arm) / "capture/poses.json");
    const HoldoutSplit split =
        split_holdout(static_cast<int>(rigs.size()), cfg_.eval.holdout_fraction, stage_seed(cfg_.seed, "holdout"));
    std::vector<nerf::TrainingView> views;
    for (int i : split.train) {
      views.push_back({read_png_rgb(arm_dir(arm) / "capture" / numbered("img", i)), rigs[i]});
    }
    const nerf::SceneBox box = nerf::SceneBox::around(sg.bounds(), 0.1);
    nerf::RadianceField<float> field(cfg_.field, stage_seed(cfg_.seed, "field"));
    const nerf::TrainResult result = nerf::train(field, std::span<const nerf::TrainingView>(views), box, cfg_.train,
                                                 stage_seed(cfg_.seed, "train"));

    nerf::Checkpoint ckpt{cfg_.field, box, {{"scene", cfg_.scene}, {"arm", arm_name(arm)}, {"seed", cfg_.seed},
                                            {"train_views", split.train}, {"iterations", cfg_.train.iterations}},
                          std::vector<float>(field.params().begin(), field.params().end())};
    nerf::save_checkpoint(dir / "field.ckpt", ckpt);
    std::string csv = "iteration,loss\n";
    for (size_t i = 0; i < result.loss_history.size(); ++i) {
      char line[64];
      std::snprintf(line, sizeof(line), "%zu,%.9g\n", i + 1, result.loss_history[i]);
      csv += line;
    }
    write_text_file(dir / "loss.csv", csv);
    write_json(dir / "split.json", {{"seed", cfg_.seed}, {"train", split.train}, {"test", split.test}});
  });
}

void Experiment::evaluate(Arm arm) {
  const SeedGeometry sg = seed_geometry();
  if (!done(arm_name(arm) + "/train/field.ckpt")) train(arm);
  stage("evaluate (" + arm_name(arm) + ")", [&] {
    const fs::path dir = arm_dir(arm) / "eval";
    fresh_dir(dir);
    const Aabb sb = sg.bounds();
    const nerf::Checkpoint ckpt = nerf::load_checkpoint(arm_dir(arm) / "train/field.ckpt");
    const nerf::RadianceField<float> field(ckpt.field, ckpt.params);
    metrics::SsimOptions ssim_options;
    ssim_options.grayscale = cfg_.eval.grayscale_ssim;

    // Ground truth at novel viewpoints, shared by both arms.
    const fs::path gt = root() / "ground_truth";
    fs::create_directories(gt);
    const auto novel = novel_views(cfg_.intrinsics, sb.center(), cfg_.eval.distance_factor * sb.extent().maxCoeff(),
                                   cfg_.eval);
    save_poses(gt / "poses.json", novel);
    metrics::MetricReport novel_report{cfg_.scene, arm_label(arm), "novel_views", {}, 0.0, 0.0};
    for (size_t i = 0; i < novel.size(); ++i) {
      const std::string name = numbered("novel", static_cast<int>(i));
      write_png(gt / name, render_rgb(mesh(), novel[i]));
      const RgbImage reference = read_png_rgb(gt / name);
      const RgbImage rendered = nerf::render_novel_view(field, ckpt.box, novel[i], cfg_.eval.render);
      write_png(dir / name, rendered);
      novel_report.add(name, reference, rendered, ssim_options);
    }

    const auto rigs = load_poses(arm_dir(arm) / "capture/poses.json");
    const auto test = read_json(arm_dir(arm) / "train/split.json").at("test").get<std::vector<int>>();
    metrics::MetricReport holdout_report{cfg_.scene, arm_label(arm), "holdout_split", {}, 0.0, 0.0};
    for (int i : test) {
      const std::string name = numbered("img", i);
      const RgbImage reference = read_png_rgb(arm_dir(arm) / "capture" / name);
      const RgbImage rendered = nerf::render_novel_view(field, ckpt.box, rigs[i], cfg_.eval.render);
      write_png(dir / ("holdout_" + name), rendered);
      holdout_report.add(name, reference, rendered, ssim_options);
    }

    const auto start = load_poses(arm_dir(arm) / "placement/start_poses.json");
    const FrameSet frames = frames_for(cfg_, sb.center());
    write_json(dir / "metrics.json",
               {{"seed", cfg_.seed},
                {"scene", cfg_.scene},
                {"arm", arm_name(arm)},
                {"novel_views", novel_report},
                {"holdout_split", holdout_report},
                {"visibility",
                 {{"planned", union_visibility(mesh(), start, frames)},
                  {"captured", coverage_report(mesh(), rigs).union_fraction}}},
                {"mean_start_height", mean_height(start)},
                {"mean_capture_height", mean_height(rigs)}});
  });
}

void Experiment::compare() {
  for (Arm arm : kArms) {
    if (!done(arm_name(arm) + "/eval/metrics.json")) evaluate(arm);
  }
  stage("compare", [&] {
    const fs::path dir = root() / "compare";
    fresh_dir(dir);
    const auto base = read_json(arm_dir(Arm::kBaseline) / "eval/metrics.json");
    const auto opt = read_json(arm_dir(Arm::kDronerf) / "eval/metrics.json");
    std::vector<metrics::ComparisonRow> rows;
    for (const char* protocol : {"novel_views", "holdout_split"}) {
      rows.push_back(metrics::compare_reports(base.at(protocol).get<metrics::MetricReport>(),
                                              opt.at(protocol).get<metrics::MetricReport>()));
    }
    write_text_file(dir / "comparison.txt", metrics::format_table(rows));
    write_text_file(dir / "comparison.csv", metrics::format_csv(rows));
    nlohmann::json j = metrics::comparison_json(rows);
    write_json(dir / "comparison.json",
               {{"seed", cfg_.seed},
                {"rows", j},
                {"visibility", {{"standard", base.at("visibility")}, {"optimized", opt.at("visibility")}}},
                {"mean_start_height", {{"standard", base.at("mean_start_height")}, {"optimized", opt.at("mean_start_height")}}}});
  });
}

void Experiment::run_all(const std::vector<Arm>& arms) {
  seed_stage();
  for (Arm arm : arms) {
    optimize(arm);
    capture(arm);
    train(arm);
    evaluate(arm);
  }
  if (arms.size() == 2) compare();
}

nlohmann::json Experiment::write_manifest() {
  nlohmann::json manifest;
  stage("manifest", [&] {
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(root())) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), root()).generic_string();
      if (rel == "manifest.json" || rel == "timings.json") continue;
      paths.push_back(rel);
    }
    std::sort(paths.begin(), paths.end());
    nlohmann::json files = nlohmann::json::array();
    std::string listing;
    for (const auto& rel : paths) {
      const std::string h = sha256_file(root() / rel);
      files.push_back({{"path", rel}, {"sha256", h}, {"bytes", fs::file_size(root() / rel)}});
      listing += h + "  " + rel + "\n";
    }
    nlohmann::json arms = nlohmann::json::object();
    for (Arm arm : kArms) {
      nlohmann::json a = nlohmann::json::object();
      const fs::path d = arm_dir(arm);
      if (fs::exists(d / "placement/configuration.json")) a["configuration"] = read_json(d / "placement/configuration.json");
      if (fs::exists(d / "capture/poses.json")) {
        a["captured_poses"] = arm_name(arm) + "/capture/poses.json";
        a["captured_images"] = load_poses(d / "capture/poses.json").size();
      }
      if (fs::exists(d / "eval/metrics.json")) a["metrics"] = read_json(d / "eval/metrics.json");
      if (!a.empty()) arms[arm_name(arm)] = a;
    }
    manifest = {{"format", "dronerf-run-manifest"},
                {"version", 1},
                {"scene", cfg_.scene},
                {"seed", cfg_.seed},
                {"config", config_to_json(cfg_)},
                {"files", files},
                {"content_hash", sha256_string(listing)},
                {"arms", arms}};
  });
  manifest["timings"] = timings_;
  write_json(root() / "manifest.json", manifest);
  return manifest;
}

}  // namespace dronerf::pipeline
