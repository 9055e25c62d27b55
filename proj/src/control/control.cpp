#include "dronerf/control.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dronerf/camera_io.hpp"
#include "dronerf/errors.hpp"

namespace dronerf {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

Vec3 horizontal(const Vec3& v) { return Vec3(v.x(), v.y(), 0.0); }

// Side face of the box whose outward normal points most toward `eye`.
Vec3 facing_side_normal(const Aabb& box, const Vec3& eye) {
  const Vec3 d = horizontal(eye - box.center());
  const std::array<Vec3, 4> normals = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
  Vec3 best = normals[0];
  double best_dot = -std::numeric_limits<double>::infinity();
  for (const Vec3& n : normals) {
    if (n.dot(d) > best_dot) {
      best_dot = n.dot(d);
      best = n;
    }
  }
  return best;
}

// 3D point for an image centroid: where its ray enters the object box, or the
// ray point closest to the box center when the ray misses.
Vec3 lift_centroid(const CameraRig& rig, const Vec2& pixel, const Aabb& box) {
  const Ray ray = rig.pixel_ray(pixel.x(), pixel.y());
  if (const auto hit = intersect_box(ray, box)) return ray.origin + hit->t_enter * ray.direction;
  const double t = std::max(0.0, (box.center() - ray.origin).dot(ray.direction));
  return ray.origin + t * ray.direction;
}

// Signed horizontal angle from the face normal to the camera direction; its
// cosine is the yaw orientation term evaluated in the ground plane.
double signed_view_angle(const Vec3& camera, const Vec3& box_point, const Vec3& normal) {
  const Vec3 c = horizontal(camera);
  const Vec3 b = horizontal(box_point);
  if ((c - b).norm() < 1e-9) return 0.0;
  const double o = std::clamp(yaw_orientation_error(c, b, normal), -1.0, 1.0);
  const double cross = normal.x() * (c - b).y() - normal.y() * (c - b).x();
  return (cross < 0.0 ? -1.0 : 1.0) * std::acos(o);
}

void read_gains(const nlohmann::json& j, PidChannelGains& g) {
  g.kp = j.value("kp", g.kp);
  g.ki = j.value("ki", g.ki);
  g.kd = j.value("kd", g.kd);
}

constexpr std::array<const char*, 4> kChannelNames = {"roll", "pitch", "throttle", "yaw"};

}  // namespace

DroneState drone_looking_at(const Vec3& position, const Vec3& target) {
  const Vec3 d = target - position;
  const double h = std::hypot(d.x(), d.y());
  if (h < 1e-9) throw std::invalid_argument("target straight above or below the drone");
  DroneState s;
  s.position = position;
  s.yaw = std::atan2(d.y(), d.x());
  s.tilt = std::atan2(-d.z(), h);
  return s;
}

void PidGains::validate() const {
  for (const auto& c : channel) {
    if (c.kp < 0.0 || c.ki < 0.0 || c.kd < 0.0) throw ConfigError("PID gains must be non-negative");
  }
  if (!(integral_clamp > 0.0)) throw ConfigError("integral clamp must be positive");
}

PidGains default_gains() {
  PidGains g;
  g.channel[kRoll] = {1.2, 0.05, 0.1};
  g.channel[kPitch] = {0.8, 0.0, 0.05};
  g.channel[kThrottle] = {1.2, 0.05, 0.1};
  g.channel[kYaw] = {1.0, 0.0, 0.05};
  g.integral_clamp = 1.0;
  return g;
}

std::pair<ControlOutput, PidState> pid_step(const std::array<double, 4>& error, const PidState& state,
                                            const PidGains& gains, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid_step needs dt > 0");
  PidState next = state;
  ControlOutput out;
  for (int c = 0; c < 4; ++c) {
    const auto& g = gains.channel[c];
    next.integral[c] = std::clamp(state.integral[c] + error[c] * dt, -gains.integral_clamp, gains.integral_clamp);
    const double derivative = state.primed ? (error[c] - state.previous_error[c]) / dt : 0.0;
    out.value[c] = std::clamp(g.kp * error[c] + g.ki * next.integral[c] + g.kd * derivative, -1.0, 1.0);
    next.previous_error[c] = error[c];
  }
  next.primed = true;
  return {out, next};
}

DroneState apply_control(const DroneState& state, const ControlOutput& cmd, double dt, const PlantConfig& plant) {
  if (!(dt > 0.0)) throw std::invalid_argument("apply_control needs dt > 0");
  const Vec3 forward(std::cos(state.yaw), std::sin(state.yaw), 0.0);
  const Vec3 right(std::sin(state.yaw), -std::cos(state.yaw), 0.0);
  Vec3 target = plant.max_speed * (cmd.roll() * right + cmd.pitch() * forward + cmd.throttle() * Vec3::UnitZ());
  if (target.norm() > plant.max_speed) target *= plant.max_speed / target.norm();
  const double target_rate = plant.max_yaw_rate * cmd.yaw();

  const double blend = 1.0 - std::exp(-dt / plant.tau);
  DroneState next = state;
  next.velocity = state.velocity + (target - state.velocity) * blend;
  next.yaw_rate = state.yaw_rate + (target_rate - state.yaw_rate) * blend;
  next.position = state.position + next.velocity * dt;
  next.yaw = wrap_angle(state.yaw + next.yaw_rate * dt);
  return next;
}

double yaw_orientation_error(const Vec3& camera_pos, const Vec3& box_centroid, const Vec3& box_normal) {
  const Vec3 d = camera_pos - box_centroid;
  const double len = d.norm();
  if (len < 1e-12) throw std::invalid_argument("camera and box centroid coincide");
  return d.dot(box_normal) / len;
}

DroneState circular_advance(const DroneState& drone, const Vec3& orbit_center, double delta_angle) {
  const double dx = drone.position.x() - orbit_center.x();
  const double dy = drone.position.y() - orbit_center.y();
  if (std::hypot(dx, dy) < 1e-12) throw std::invalid_argument("drone sits on the orbit axis");
  const double c = std::cos(delta_angle);
  const double s = std::sin(delta_angle);
  DroneState next = drone;
  next.position = Vec3(orbit_center.x() + c * dx - s * dy, orbit_center.y() + s * dx + c * dy, drone.position.z());
  next.yaw = std::atan2(orbit_center.y() - next.position.y(), orbit_center.x() - next.position.x());
  next.velocity = Vec3::Zero();
  next.yaw_rate = 0.0;
  return next;
}

void ServoConfig::validate() const {
  gains.validate();
  if (!(dt > 0.0) || max_steps < 1 || !(tol_px > 0.0) || !(yaw_tol > 0.0)) throw ConfigError("invalid servo loop config");
  if (!(target_fill > 0.0 && target_fill <= 1.0)) throw ConfigError("target_fill must lie in (0, 1]");
  if (lost_frames < 1) throw ConfigError("lost_frames must be >= 1");
  if (!(perception_scale > 0.0 && perception_scale <= 1.0)) throw ConfigError("perception_scale must lie in (0, 1]");
  if (sigmas_per_octave < 1) throw ConfigError("sigmas_per_octave must be >= 1");
  if (!(plant.tau > 0.0) || !(plant.max_speed > 0.0) || !(plant.max_yaw_rate > 0.0)) throw ConfigError("invalid plant");
}

ServoResult servo_to_object(const DroneState& drone, const TriangleMesh& mesh, const Intrinsics& intrinsics,
                            const Aabb& object_box, const ServoConfig& cfg, bool record_telemetry) {
  cfg.validate();
  const Intrinsics small = intrinsics.scaled(cfg.perception_scale);
  const double to_full = static_cast<double>(intrinsics.width) / small.width;
  const std::vector<double> sigmas =
      geometric_sigmas(1.0, std::min(small.width, small.height) / 4.0, cfg.sigmas_per_octave);
  const Vec2 center(intrinsics.width / 2.0, intrinsics.height / 2.0);

  const Vec3 normal = facing_side_normal(object_box, drone.position);
  std::optional<double> reference_angle;
  ServoResult result;
  result.state = drone;
  PidState pid;
  int missing = 0;

  for (int step = 0;; ++step) {
    const CameraRig rig_small = result.state.camera(small);
    const GrayImage frame = render_shaded(mesh, rig_small);
    const std::optional<BoundingBox> box = find_object_box(frame, sigmas, cfg.blobs);
    ServoTelemetry t;
    t.step = step;
    t.position = result.state.position;
    t.yaw = result.state.yaw;
    t.box = box;
    ControlOutput command;

    if (!box) {
      if (++missing >= cfg.lost_frames) {
        throw TargetLostError("target lost for " + std::to_string(missing) + " frames at servo step " +
                              std::to_string(step));
      }
    } else {
      missing = 0;
      const Vec2 centroid = box->centroid() * to_full;
      const Vec2 offset = centroid - center;
      const Vec3 lifted = lift_centroid(result.state.camera(intrinsics), centroid, object_box);
      const double angle = signed_view_angle(result.state.position, lifted, normal);
      if (!reference_angle) reference_angle = angle;
      result.centroid_error_px = offset.norm();
      result.yaw_error = wrap_angle(*reference_angle - angle);
      t.centroid_error_px = result.centroid_error_px;
      t.yaw_error = result.yaw_error;

      if (result.centroid_error_px < cfg.tol_px && std::abs(result.yaw_error) < cfg.yaw_tol) {
        result.converged = true;
        result.steps = step;
        if (record_telemetry) result.telemetry.push_back(t);
        return result;
      }
      const double fill = std::max(static_cast<double>(box->w) / small.width, static_cast<double>(box->h) / small.height);
      const std::array<double, 4> error = {offset.x() / center.x(), cfg.target_fill - fill, -offset.y() / center.y(),
                                           result.yaw_error};
      std::tie(command, pid) = pid_step(error, pid, cfg.gains, cfg.dt);
    }
    t.command = command;
    if (record_telemetry) result.telemetry.push_back(t);
    if (step >= cfg.max_steps) {
      result.steps = step;
      return result;
    }
    result.state = apply_control(result.state, command, cfg.dt, cfg.plant);
  }
}

void CaptureSchedule::validate() const {
  if (iterations < 1) throw ConfigError("capture iterations must be >= 1");
  if (delta_angle < 0.0) throw ConfigError("capture delta_angle must be positive (0 selects the default)");
  if (images_per_stop < 1) throw ConfigError("images_per_stop must be >= 1");
}

double CaptureSchedule::step_for(int drones) const {
  if (delta_angle > 0.0) return delta_angle;
  return 2.0 * std::numbers::pi / (std::max(1, drones) * iterations);
}

std::vector<Capture> run_capture(std::span<const DroneState> drones, const TriangleMesh& mesh, const Aabb& object_box,
                                 const CaptureConfig& cfg, uint64_t seed) {
  cfg.schedule.validate();
  cfg.servo.validate();
  const int k = static_cast<int>(drones.size());
  const int per_stop = cfg.schedule.images_per_stop;
  const int stops = cfg.schedule.iterations * per_stop;
  const double step = cfg.schedule.step_for(k) / per_stop;
  const Vec3 orbit = object_box.center();

  std::vector<std::vector<Capture>> per_drone(k);
  std::vector<std::exception_ptr> failure(k);
#pragma omp parallel for schedule(dynamic)
  for (int d = 0; d < k; ++d) {
    try {
      std::seed_seq seq{seed, static_cast<uint64_t>(d)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> jitter(0.0, 1.0);
      DroneState state = drones[d];
      for (int s = 0; s < stops; ++s) {
        if (s > 0) state = circular_advance(state, orbit, step);
        state.position += cfg.arrival_noise_m * Vec3(jitter(rng), jitter(rng), jitter(rng));
        state.yaw = wrap_angle(state.yaw + cfg.arrival_noise_rad * jitter(rng));
        const ServoResult servo = servo_to_object(state, mesh, cfg.intrinsics, object_box, cfg.servo);
        state = servo.state;
        state.velocity = Vec3::Zero();
        state.yaw_rate = 0.0;
        const CameraRig rig = state.camera(cfg.intrinsics);
        per_drone[d].push_back(Capture{render_rgb(mesh, rig), rig, d, s / per_stop, servo.converged, servo.steps,
                                       servo.centroid_error_px});
      }
    } catch (...) {
      failure[d] = std::current_exception();
    }
  }
  for (const auto& f : failure) {
    if (f) std::rethrow_exception(f);
  }
  std::vector<Capture> out;
  out.reserve(static_cast<size_t>(stops) * k);
  for (int s = 0; s < stops; ++s) {
    for (int d = 0; d < k; ++d) out.push_back(std::move(per_drone[d][s]));
  }
  return out;
}

void to_json(nlohmann::json& j, const ServoConfig& c) {
  nlohmann::json gains = nlohmann::json::object();
  for (int i = 0; i < 4; ++i) {
    const auto& g = c.gains.channel[i];
    gains[kChannelNames[i]] = {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}};
  }
  gains["integral_clamp"] = c.gains.integral_clamp;
  j = {{"gains", gains},
       {"plant", {{"tau", c.plant.tau}, {"max_speed", c.plant.max_speed}, {"max_yaw_rate", c.plant.max_yaw_rate}}},
       {"dt", c.dt},
       {"max_steps", c.max_steps},
       {"tol_px", c.tol_px},
       {"yaw_tol", c.yaw_tol},
       {"target_fill", c.target_fill},
       {"lost_frames", c.lost_frames},
       {"perception_scale", c.perception_scale},
       {"sigmas_per_octave", c.sigmas_per_octave},
       {"blob_threshold", c.blobs.threshold}};
}

void from_json(const nlohmann::json& j, ServoConfig& c) {
  if (j.contains("gains")) {
    const auto& g = j.at("gains");
    for (int i = 0; i < 4; ++i) {
      if (g.contains(kChannelNames[i])) read_gains(g.at(kChannelNames[i]), c.gains.channel[i]);
    }
    c.gains.integral_clamp = g.value("integral_clamp", c.gains.integral_clamp);
  }
  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    c.plant.tau = p.value("tau", c.plant.tau);
    c.plant.max_speed = p.value("max_speed", c.plant.max_speed);
    c.plant.max_yaw_rate = p.value("max_yaw_rate", c.plant.max_yaw_rate);
  }
  c.dt = j.value("dt", c.dt);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.tol_px = j.value("tol_px", c.tol_px);
  c.yaw_tol = j.value("yaw_tol", c.yaw_tol);
  c.target_fill = j.value("target_fill", c.target_fill);
  c.lost_frames = j.value("lost_frames", c.lost_frames);
  c.perception_scale = j.value("perception_scale", c.perception_scale);
  c.sigmas_per_octave = j.value("sigmas_per_octave", c.sigmas_per_octave);
  c.blobs.threshold = j.value("blob_threshold", c.blobs.threshold);
}

void to_json(nlohmann::json& j, const CaptureConfig& c) {
  j = {{"iterations", c.schedule.iterations},
       {"delta_angle", c.schedule.delta_angle},
       {"images_per_stop", c.schedule.images_per_stop},
       {"servo", c.servo},
       {"intrinsics", intrinsics_to_json(c.intrinsics)},
       {"arrival_noise_m", c.arrival_noise_m},
       {"arrival_noise_rad", c.arrival_noise_rad}};
}

void from_json(const nlohmann::json& j, CaptureConfig& c) {
  c.schedule.iterations = j.value("iterations", c.schedule.iterations);
  c.schedule.delta_angle = j.value("delta_angle", c.schedule.delta_angle);
  c.schedule.images_per_stop = j.value("images_per_stop", c.schedule.images_per_stop);
  if (j.contains("servo")) c.servo = j.at("servo").get<ServoConfig>();
  if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  c.arrival_noise_m = j.value("arrival_noise_m", c.arrival_noise_m);
  c.arrival_noise_rad = j.value("arrival_noise_rad", c.arrival_noise_rad);
}

}  // namespace dronerf
