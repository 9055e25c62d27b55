// Regenerates assets/*.mesh and assets/manifest.json.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dronerf/scenes.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the bundled synthetic scenes"};
  std::string dir = "assets";
  app.add_option("-o,--out", dir, "output directory");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& info : dronerf::scenes::catalogue()) {
    const auto mesh = dronerf::scenes::make_scene(info.name);
    const std::string file = info.name + ".mesh";
    dronerf::save_mesh(fs::path(dir) / file, mesh);
    const auto& b = mesh.bounds();
    manifest[info.name] = {{"file", file},
                           {"description", info.description},
                           {"vertices", mesh.vertex_count()},
                           {"triangles", mesh.triangle_count()},
                           {"bounds_min", {b.min.x(), b.min.y(), b.min.z()}},
                           {"bounds_max", {b.max.x(), b.max.y(), b.max.z()}}};
    std::cout << info.name << ": " << mesh.vertex_count() << " vertices, " << mesh.triangle_count()
              << " triangles\n";
  }
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';
  return 0;
}
