#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dronerf/geometry.hpp"

namespace dronerf {

// Camera-poses document:
// {
//   "format": "dronerf-camera-poses", "version": 1,
//   "convention": "...",
//   "cameras": [ { "id": 0, "intrinsics": {"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..},
//                  "camera_to_world": [[r00,r01,r02,tx],[..],[..],[0,0,0,1]] }, ... ]
// }
nlohmann::json intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

nlohmann::json poses_to_json(std::span<const CameraRig> rigs);
std::vector<CameraRig> poses_from_json(const nlohmann::json& doc);

void save_poses(const std::filesystem::path& path, std::span<const CameraRig> rigs);
std::vector<CameraRig> load_poses(const std::filesystem::path& path);

nlohmann::json aabb_to_json(const Aabb& box);
Aabb aabb_from_json(const nlohmann::json& j);

// Reads a whole file into a string; throws std::runtime_error when missing.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dronerf
