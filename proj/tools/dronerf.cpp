// dronerf: run the placement experiment stage by stage or end to end.
//
// Exit codes: 0 success, 2 config error, 3 stage failure.
#include <iostream>

#include <CLI11.hpp>

#include "dronerf/errors.hpp"
#include "dronerf/camera_io.hpp"
#include "dronerf/pipeline.hpp"

namespace pl = dronerf::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware multi-drone capture and radiance-field training"};
  app.require_subcommand(1, 1);
  std::string config_path = "configs/default.jsonc";
  std::optional<uint64_t> seed;
  std::string output;
  std::string arm = "both";
  app.add_option("-c,--config", config_path, "experiment config (JSON with comments)")->capture_default_str();
  app.add_option("-s,--seed", seed, "override the config seed");
  app.add_option("-o,--output", output, "override the run directory");
  app.add_option("-a,--arm", arm, "baseline, dronerf or both")->capture_default_str();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"optimize", "seed snapshots and camera placement"},
      {"capture", "servo the drones and capture images"},
      {"train", "fit a radiance field to the captured images"},
      {"evaluate", "render held-out and novel views, compute metrics"},
      {"compare", "side-by-side comparison of both arms"},
      {"all", "every stage for the selected arms, then compare"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::unique_ptr<pl::Experiment> experiment;
  std::vector<pl::Arm> arms;
  try {
    pl::ExperimentConfig cfg = pl::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.placement.annealing.seed = *seed;
    }
    if (!output.empty()) cfg.output_dir = output;
    if (arm == "both") arms.assign(std::begin(pl::kArms), std::end(pl::kArms));
    else arms.push_back(pl::parse_arm(arm));
    experiment = std::make_unique<pl::Experiment>(std::move(cfg));
  } catch (const dronerf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "optimize") {
      for (auto a : arms) experiment->optimize(a);
    } else if (command == "capture") {
      for (auto a : arms) experiment->capture(a);
    } else if (command == "train") {
      for (auto a : arms) experiment->train(a);
    } else if (command == "evaluate") {
      for (auto a : arms) experiment->evaluate(a);
    } else if (command == "compare") {
      experiment->compare();
    } else {
      experiment->run_all(arms);
    }
    experiment->write_manifest();
  } catch (const dronerf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dronerf::StageError& e) {
    std::cerr << "stage failure [" << e.stage() << "]: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "stage failure [" << command << "]: " << e.what() << "\n";
    return 3;
  }
  if (command == "compare" || (command == "all" && arms.size() == 2)) {
    std::cout << dronerf::read_text_file(experiment->root() / "compare/comparison.txt");
  }
  std::cout << "run directory: " << experiment->root().string() << "\n";
  return 0;
}
