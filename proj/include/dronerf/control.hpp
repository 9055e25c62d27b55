#pragma once

// Simulated quadrotor with a fixed forward camera, PID visual servoing on
// the detected region, and the orbit-and-capture schedule.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dronerf/blob.hpp"
#include "dronerf/geometry.hpp"
#include "dronerf/image.hpp"

namespace dronerf {

struct DroneState {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;  // heading, CCW from +x
  Vec3 velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  double tilt = 0.0;  // fixed downward camera pitch

  CameraRig camera(const Intrinsics& intrinsics) const {
    return CameraRig::from_yaw_tilt(intrinsics, position, yaw, tilt);
  }
};

// Hovering drone whose camera looks at `target`.
DroneState drone_looking_at(const Vec3& position, const Vec3& target);

enum Channel : int { kRoll = 0, kPitch = 1, kThrottle = 2, kYaw = 3 };

struct PidChannelGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

struct PidGains {
  std::array<PidChannelGains, 4> channel{};  // indexed by Channel
  double integral_clamp = 1.0;

  void validate() const;
};

// Gains tuned against the bundled scenes.
PidGains default_gains();

struct ControlOutput {
  std::array<double, 4> value{};  // roll, pitch, throttle, yaw in [-1, 1]

  double roll() const { return value[kRoll]; }
  double pitch() const { return value[kPitch]; }
  double throttle() const { return value[kThrottle]; }
  double yaw() const { return value[kYaw]; }
};

struct PidState {
  std::array<double, 4> integral{};
  std::array<double, 4> previous_error{};
  bool primed = false;  // previous_error valid
};

// P + clamped I + D on the error difference; outputs clamped to [-1, 1].
std::pair<ControlOutput, PidState> pid_step(const std::array<double, 4>& error, const PidState& state,
                                            const PidGains& gains, double dt);

struct PlantConfig {
  double tau = 0.2;            // velocity time constant, s
  double max_speed = 1.0;      // m/s
  double max_yaw_rate = 1.0;   // rad/s
};

// Roll moves along the body right axis, pitch along the horizontal heading,
// throttle along +z; velocities relax toward cmd * max with time constant tau.
DroneState apply_control(const DroneState& state, const ControlOutput& cmd, double dt, const PlantConfig& plant = {});

// ((C - C_box) / |C - C_box|) . n
double yaw_orientation_error(const Vec3& camera_pos, const Vec3& box_centroid, const Vec3& box_normal);

// Rotates the drone about the vertical axis through `orbit_center`, keeping
// radius and height, re-aims the heading at the center and stops it.
DroneState circular_advance(const DroneState& drone, const Vec3& orbit_center, double delta_angle);

struct ServoConfig {
  PidGains gains = default_gains();
  PlantConfig plant;
  double dt = 0.1;
  int max_steps = 500;
  double tol_px = 2.0;              // centroid error at full resolution
  double yaw_tol = 0.02;            // rad, against the heading held at start
  double target_fill = 0.6;         // max(w / W, h / H) the pitch channel drives toward
  int lost_frames = 5;              // consecutive frames without a region
  double perception_scale = 0.5;    // control frames are rendered at this scale
  int sigmas_per_octave = 4;
  BlobOptions blobs;

  void validate() const;
};

void to_json(nlohmann::json& j, const ServoConfig& c);
void from_json(const nlohmann::json& j, ServoConfig& c);

struct ServoTelemetry {
  int step = 0;
  Vec3 position;
  double yaw = 0.0;
  std::optional<BoundingBox> box;  // at perception resolution
  double centroid_error_px = 0.0;
  double yaw_error = 0.0;
  ControlOutput command;
};

struct ServoResult {
  DroneState state;
  bool converged = false;
  int steps = 0;
  double centroid_error_px = 0.0;
  double yaw_error = 0.0;
  std::vector<ServoTelemetry> telemetry;  // filled when requested
};

// Closed loop render -> detect -> box -> PID -> plant. `object_box` is the
// crude object geometry used to lift the 2D centroid for the yaw channel.
// Throws TargetLostError after `lost_frames` consecutive empty frames.
ServoResult servo_to_object(const DroneState& drone, const TriangleMesh& mesh, const Intrinsics& intrinsics,
                            const Aabb& object_box, const ServoConfig& cfg, bool record_telemetry = false);

struct CaptureSchedule {
  int iterations = 5;
  double delta_angle = 0.0;  // 0 selects 2 pi / (drones * iterations)
  int images_per_stop = 1;   // > 1 splits each step into that many servoed stops

  void validate() const;
  double step_for(int drones) const;
};

struct CaptureConfig {
  CaptureSchedule schedule;
  ServoConfig servo;
  Intrinsics intrinsics;     // capture resolution
  double arrival_noise_m = 0.05;
  double arrival_noise_rad = 0.03;
};

void to_json(nlohmann::json& j, const CaptureConfig& c);
void from_json(const nlohmann::json& j, CaptureConfig& c);

struct Capture {
  RgbImage image;
  CameraRig rig;
  int drone = 0;
  int iteration = 0;
  bool converged = false;
  int servo_steps = 0;
  double centroid_error_px = 0.0;
};

// Each iteration every drone servos, captures once per stop, then advances
// along its orbit. Output ordered by iteration, then drone.
std::vector<Capture> run_capture(std::span<const DroneState> drones, const TriangleMesh& mesh,
                                 const Aabb& object_box, const CaptureConfig& cfg, uint64_t seed);

}  // namespace dronerf
