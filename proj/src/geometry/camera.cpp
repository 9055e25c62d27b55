#include <cmath>
#include <stdexcept>

#include "dronerf/geometry.hpp"

namespace dronerf {

Intrinsics Intrinsics::scaled(double factor) const {
  Intrinsics out = *this;
  out.fx *= factor;
  out.fy *= factor;
  out.cx *= factor;
  out.cy *= factor;
  out.width = static_cast<int>(std::lround(width * factor));
  out.height = static_cast<int>(std::lround(height * factor));
  return out;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
}

CameraRig::CameraRig(const Intrinsics& intrinsics, const Vec3& position, const Mat3& world_to_camera)
    : intrinsics_(intrinsics), position_(position), rotation_(world_to_camera) {
  intrinsics_.validate();
  if (!(rotation_ * rotation_.transpose()).isApprox(Mat3::Identity(), 1e-6) ||
      std::abs(rotation_.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("camera rotation is not orthonormal");
  }
}

CameraRig CameraRig::from_yaw_tilt(const Intrinsics& intrinsics, const Vec3& eye, double yaw, double tilt) {
  const Vec3 forward(std::cos(tilt) * std::cos(yaw), std::cos(tilt) * std::sin(yaw), -std::sin(tilt));
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return CameraRig(intrinsics, eye, r);
}

CameraRig CameraRig::look_at(const Intrinsics& intrinsics, const Vec3& eye, const Vec3& target) {
  const Vec3 d = target - eye;
  const double horizontal = std::hypot(d.x(), d.y());
  if (horizontal < 1e-9) throw std::invalid_argument("look_at: target straight above or below the eye");
  return from_yaw_tilt(intrinsics, eye, std::atan2(d.y(), d.x()), std::atan2(-d.z(), horizontal));
}

CameraRig CameraRig::from_camera_to_world(const Intrinsics& intrinsics, const Mat4& camera_to_world) {
  const Mat3 r = camera_to_world.topLeftCorner<3, 3>().transpose();
  return CameraRig(intrinsics, camera_to_world.topRightCorner<3, 1>(), r);
}

Mat4 CameraRig::camera_to_world() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.transpose();
  m.topRightCorner<3, 1>() = position_;
  return m;
}

std::optional<Vec2> CameraRig::project(const Vec3& world) const {
  const Vec3 p = to_camera(world);
  if (p.z() <= 0.0) return std::nullopt;
  return Vec2(intrinsics_.fx * p.x() / p.z() + intrinsics_.cx, intrinsics_.fy * p.y() / p.z() + intrinsics_.cy);
}

Vec3 CameraRig::back_project(const Vec2& pixel, double depth) const {
  const Vec3 cam((pixel.x() - intrinsics_.cx) / intrinsics_.fx * depth,
                 (pixel.y() - intrinsics_.cy) / intrinsics_.fy * depth, depth);
  return to_world(cam);
}

Ray CameraRig::pixel_ray(double u, double v) const {
  const Vec3 cam((u - intrinsics_.cx) / intrinsics_.fx, (v - intrinsics_.cy) / intrinsics_.fy, 1.0);
  return Ray{position_, (rotation_.transpose() * cam).normalized()};
}

}  // namespace dronerf
