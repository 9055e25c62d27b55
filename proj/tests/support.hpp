#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "dronerf/geometry.hpp"

namespace testsupport {

inline std::filesystem::path asset(const std::string& name) { return std::filesystem::path(DRONERF_ASSET_DIR) / name; }
inline std::filesystem::path config(const std::string& name) { return std::filesystem::path(DRONERF_CONFIG_DIR) / name; }

inline const char* kCubeText = R"(# unit cube
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v -0.5 0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v -0.5 0.5 0.5
v 0.5 0.5 0.5
f 1 3 4
f 1 4 2
f 5 6 8
f 5 8 7
f 1 2 6
f 1 6 5
f 3 7 8
f 3 8 4
f 1 5 7
f 1 7 3
f 2 4 8
f 2 8 6
)";

inline dronerf::TriangleMesh unit_cube() { return dronerf::parse_mesh(kCubeText); }

// Bright filled disk on black.
inline dronerf::GrayImage disk(int w, int h, double cx, double cy, double r, float value = 1.0f) {
  dronerf::GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::hypot(x - cx, y - cy) <= r) img(x, y) = value;
    }
  }
  return img;
}

}  // namespace testsupport
