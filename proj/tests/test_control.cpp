#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dronerf/control.hpp"
#include "dronerf/errors.hpp"
#include "support.hpp"

using namespace dronerf;

namespace {

const Aabb kCubeBox{Vec3::Constant(-0.5), Vec3::Constant(0.5)};

PidGains single_channel(int c, PidChannelGains g, double clamp = 1.0) {
  PidGains gains;
  gains.channel[c] = g;
  gains.integral_clamp = clamp;
  return gains;
}

}  // namespace

TEST_CASE("yaw orientation error") {
  const Vec3 centroid(0, 0, 0);
  const Vec3 normal(1, 0, 0);
  CHECK(yaw_orientation_error(Vec3(2, 0, 0), centroid, normal) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(yaw_orientation_error(Vec3(0, 2, 0), centroid, normal)) < 1e-12);
  CHECK(std::abs(yaw_orientation_error(Vec3(1, 1, 0), centroid, normal) - std::sqrt(0.5)) < 1e-6);
  CHECK(yaw_orientation_error(Vec3(-3, 0, 0), centroid, normal) == doctest::Approx(-1.0));
  // Scale of the offset does not matter.
  CHECK(yaw_orientation_error(Vec3(7, 7, 0), centroid, normal) ==
        doctest::Approx(yaw_orientation_error(Vec3(0.1, 0.1, 0), centroid, normal)));
  CHECK_THROWS(yaw_orientation_error(centroid, centroid, normal));
}

TEST_CASE("PID step") {
  SUBCASE("zero error gives zero command") {
    const auto [out, st] = pid_step({0, 0, 0, 0}, PidState{}, default_gains(), 0.1);
    for (double v : out.value) CHECK(v == 0.0);
    CHECK(st.primed);
  }
  SUBCASE("pure proportional") {
    const auto gains = single_channel(kRoll, {0.5, 0.0, 0.0});
    const auto [out, st] = pid_step({0.4, 0.9, 0.9, 0.9}, PidState{}, gains, 0.1);
    CHECK(out.roll() == doctest::Approx(0.2));
    CHECK(out.pitch() == 0.0);
    CHECK(out.throttle() == 0.0);
    CHECK(out.yaw() == 0.0);
  }
  SUBCASE("output saturates") {
    const auto gains = single_channel(kYaw, {10.0, 0.0, 0.0});
    CHECK(pid_step({0, 0, 0, 1.0}, PidState{}, gains, 0.1).first.yaw() == 1.0);
    CHECK(pid_step({0, 0, 0, -1.0}, PidState{}, gains, 0.1).first.yaw() == -1.0);
  }
  SUBCASE("integral ramps to its clamp") {
    const auto gains = single_channel(kThrottle, {0.0, 1.0, 0.0}, 0.5);
    PidState st;
    std::vector<double> outs;
    for (int i = 0; i < 10; ++i) {
      ControlOutput out;
      std::tie(out, st) = pid_step({0, 0, 1.0, 0}, st, gains, 0.1);
      outs.push_back(out.throttle());
    }
    for (int i = 0; i < 5; ++i) CHECK(outs[i] == doctest::Approx(0.1 * (i + 1)));
    for (int i = 5; i < 10; ++i) CHECK(outs[i] == doctest::Approx(0.5));
    CHECK(st.integral[kThrottle] == doctest::Approx(0.5));
  }
  SUBCASE("derivative acts from the second step on") {
    const auto gains = single_channel(kPitch, {0.0, 0.0, 0.1});
    auto [first, st] = pid_step({0, 0.2, 0, 0}, PidState{}, gains, 0.1);
    CHECK(first.pitch() == 0.0);
    const auto second = pid_step({0, 0.5, 0, 0}, st, gains, 0.1).first;
    CHECK(second.pitch() == doctest::Approx(0.1 * (0.5 - 0.2) / 0.1));
  }
  SUBCASE("non-positive dt") { CHECK_THROWS(pid_step({0, 0, 0, 0}, PidState{}, default_gains(), 0.0)); }
}

TEST_CASE("plant response") {
  DroneState s;
  s.position = Vec3(1, 2, 3);
  s.yaw = 0.3;
  SUBCASE("rest stays at rest") {
    const auto n = apply_control(s, ControlOutput{}, 0.1);
    CHECK((n.position - s.position).norm() == 0.0);
    CHECK(n.yaw == doctest::Approx(s.yaw));
  }
  SUBCASE("full pitch reaches max speed along the heading") {
    ControlOutput cmd;
    cmd.value[kPitch] = 1.0;
    PlantConfig plant;
    DroneState n = s;
    for (int i = 0; i < 100; ++i) n = apply_control(n, cmd, 0.1, plant);
    CHECK(std::abs(n.velocity.norm() - plant.max_speed) <= 0.01 * plant.max_speed);
    CHECK(n.velocity.normalized().dot(Vec3(std::cos(s.yaw), std::sin(s.yaw), 0)) == doctest::Approx(1.0));
    CHECK(n.position.z() == doctest::Approx(s.position.z()));
  }
  SUBCASE("combined command is limited to max speed") {
    ControlOutput cmd;
    cmd.value = {1.0, 1.0, 1.0, 0.0};
    DroneState n = s;
    for (int i = 0; i < 100; ++i) n = apply_control(n, cmd, 0.1);
    CHECK(n.velocity.norm() <= 1.0 + 1e-9);
  }
  SUBCASE("opposite roll commands mirror each other") {
    ControlOutput left, right;
    left.value[kRoll] = -0.7;
    right.value[kRoll] = 0.7;
    DroneState a = s, b = s;
    for (int i = 0; i < 20; ++i) {
      a = apply_control(a, left, 0.1);
      b = apply_control(b, right, 0.1);
    }
    CHECK(((a.position - s.position) + (b.position - s.position)).norm() < 1e-12);
    // Positive roll moves toward the camera's right, i.e. the image +x side.
    const CameraRig rig = s.camera(Intrinsics{});
    CHECK(rig.to_camera(b.position).x() > 0.0);
  }
}

TEST_CASE("circular advance") {
  DroneState d = drone_looking_at(Vec3(3, 0, 1.2), Vec3(0, 0, 0.5));
  const Vec3 c(0, 0, 0.5);
  SUBCASE("full turn returns to the start") {
    const auto n = circular_advance(d, c, 2.0 * std::numbers::pi);
    CHECK((n.position - d.position).norm() < 1e-12);
  }
  SUBCASE("quarter turn") {
    const auto n = circular_advance(d, c, std::numbers::pi / 2.0);
    CHECK((n.position - Vec3(0, 3, 1.2)).norm() < 1e-12);
    CHECK(n.yaw == doctest::Approx(-std::numbers::pi / 2.0));
  }
  SUBCASE("radius and height are preserved, heading aims at the axis") {
    DroneState cur = d;
    for (int i = 0; i < 17; ++i) {
      cur = circular_advance(cur, c, 0.37);
      CHECK(std::hypot(cur.position.x(), cur.position.y()) == doctest::Approx(3.0));
      CHECK(cur.position.z() == 1.2);
      const Vec3 to_axis = Vec3(-cur.position.x(), -cur.position.y(), 0).normalized();
      CHECK(to_axis.dot(Vec3(std::cos(cur.yaw), std::sin(cur.yaw), 0)) == doctest::Approx(1.0));
      CHECK(cur.velocity.norm() == 0.0);
    }
  }
  SUBCASE("on the axis") {
    DroneState on = d;
    on.position = Vec3(0, 0, 2);
    CHECK_THROWS(circular_advance(on, c, 0.1));
  }
}

TEST_CASE("visual servo on the cube") {
  const auto mesh = testsupport::unit_cube();
  const Intrinsics intr;
  ServoConfig cfg;
  SUBCASE("already centered") {
    const auto start = drone_looking_at(Vec3(-3.0, 0, 0), Vec3::Zero());
    const auto r = servo_to_object(start, mesh, intr, kCubeBox, cfg);
    CHECK(r.converged);
    CHECK(r.steps <= 2);
    CHECK((r.state.position - start.position).norm() < 1e-3);
    CHECK(std::abs(r.state.yaw - start.yaw) < 1e-3);
  }
  SUBCASE("lateral offset converges") {
    for (double offset : {0.5, -0.5}) {
      DroneState start = drone_looking_at(Vec3(-3.0, 0, 0), Vec3::Zero());
      start.position.y() += offset;
      const auto r = servo_to_object(start, mesh, intr, kCubeBox, cfg, true);
      CHECK(r.converged);
      CHECK(r.steps <= 500);
      CHECK(r.centroid_error_px < 2.0);
      CHECK(std::abs(r.state.position.y()) < std::abs(offset));
      // The object projects to the image center at the final pose.
      const auto p = r.state.camera(intr).project(Vec3::Zero());
      REQUIRE(p);
      CHECK((*p - Vec2(64, 64)).norm() < 8.0);
      CHECK(r.telemetry.size() == static_cast<size_t>(r.steps + 1));
    }
  }
  SUBCASE("object behind the camera") {
    const DroneState start = drone_looking_at(Vec3(-3.0, 0, 0), Vec3(-6.0, 0, 0));
    CHECK_THROWS_AS(servo_to_object(start, mesh, intr, kCubeBox, cfg), TargetLostError);
  }
  SUBCASE("invalid config") {
    ServoConfig bad = cfg;
    bad.target_fill = 0.0;
    CHECK_THROWS_AS(servo_to_object(drone_looking_at(Vec3(-3, 0, 0), Vec3::Zero()), mesh, intr, kCubeBox, bad),
                    ConfigError);
  }
}

TEST_CASE("capture schedule") {
  const auto mesh = testsupport::unit_cube();
  CaptureConfig cfg;
  cfg.schedule.iterations = 2;
  std::vector<DroneState> drones;
  for (int i = 0; i < 2; ++i) {
    const double a = std::numbers::pi * i;
    drones.push_back(drone_looking_at(Vec3(3 * std::cos(a), 3 * std::sin(a), 0.3), Vec3::Zero()));
  }
  CHECK(cfg.schedule.step_for(4) == doctest::Approx(2.0 * std::numbers::pi / 8.0));
  cfg.schedule.delta_angle = 0.2;
  CHECK(cfg.schedule.step_for(4) == 0.2);
  cfg.schedule.delta_angle = 0.0;

  const auto caps = run_capture(drones, mesh, kCubeBox, cfg, 7);
  REQUIRE(caps.size() == 4);
  for (size_t i = 0; i < caps.size(); ++i) {
    CHECK(caps[i].iteration == static_cast<int>(i) / 2);
    CHECK(caps[i].drone == static_cast<int>(i) % 2);
    CHECK(caps[i].converged);
    CHECK(caps[i].centroid_error_px < cfg.servo.tol_px);
    CHECK(caps[i].image.width() == cfg.intrinsics.width);
  }
  const auto again = run_capture(drones, mesh, kCubeBox, cfg, 7);
  for (size_t i = 0; i < caps.size(); ++i) {
    CHECK(std::ranges::equal(again[i].image.data(), caps[i].image.data()));
    CHECK(again[i].rig.camera_to_world() == caps[i].rig.camera_to_world());
  }
  cfg.schedule.images_per_stop = 2;
  CHECK(run_capture(drones, mesh, kCubeBox, cfg, 7).size() == 8);
}
