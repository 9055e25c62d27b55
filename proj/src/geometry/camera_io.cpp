#include "dronerf/camera_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dronerf {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "dronerf-camera-poses";
constexpr int kVersion = 1;
}  // namespace

json intrinsics_to_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const json& j) {
  Intrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.validate();
  return k;
}

json poses_to_json(std::span<const CameraRig> rigs) {
  json cams = json::array();
  for (size_t i = 0; i < rigs.size(); ++i) {
    const Mat4 m = rigs[i].camera_to_world();
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    cams.push_back({{"id", i}, {"intrinsics", intrinsics_to_json(rigs[i].intrinsics())}, {"camera_to_world", rows}});
  }
  return {{"format", kFormat},
          {"version", kVersion},
          {"convention", "camera_to_world row-major; camera +x right, +y down, +z forward; world +z up; meters"},
          {"cameras", cams}};
}

std::vector<CameraRig> poses_from_json(const json& doc) {
  if (doc.value("format", "") != kFormat) throw std::runtime_error("not a camera-poses document");
  if (doc.value("version", 0) != kVersion) throw std::runtime_error("unsupported camera-poses version");
  std::vector<CameraRig> rigs;
  for (const auto& cam : doc.at("cameras")) {
    Mat4 m;
    const auto& rows = cam.at("camera_to_world");
    if (rows.size() != 4) throw std::runtime_error("camera_to_world must have 4 rows");
    for (int r = 0; r < 4; ++r) {
      if (rows[r].size() != 4) throw std::runtime_error("camera_to_world rows must have 4 entries");
      for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c].get<double>();
    }
    rigs.push_back(CameraRig::from_camera_to_world(intrinsics_from_json(cam.at("intrinsics")), m));
  }
  return rigs;
}

void save_poses(const std::filesystem::path& path, std::span<const CameraRig> rigs) {
  write_text_file(path, poses_to_json(rigs).dump(2) + "\n");
}

std::vector<CameraRig> load_poses(const std::filesystem::path& path) {
  return poses_from_json(json::parse(read_text_file(path)));
}

json aabb_to_json(const Aabb& box) {
  return {{"min", {box.min.x(), box.min.y(), box.min.z()}}, {"max", {box.max.x(), box.max.y(), box.max.z()}}};
}

Aabb aabb_from_json(const json& j) {
  Aabb b;
  for (int a = 0; a < 3; ++a) {
    b.min[a] = j.at("min").at(a).get<double>();
    b.max[a] = j.at("max").at(a).get<double>();
  }
  return b;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace dronerf
