#include "fcs/geom.hpp"

#include <algorithm>
#include <cmath>

#include "fcs/errors.hpp"

namespace fcs {

double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod maps +pi to -pi; the range is half-open at -pi.
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {
  if (q_.w() < 0.0) q_.coeffs() *= -1.0;
}

Rotation::Rotation(const Mat3& m) : Rotation(Eigen::Quaterniond(m)) {}

Rotation Rotation::from_euler(const Euler& e) {
  return about_z(e.yaw) * about_y(e.pitch) * about_x(e.roll);
}

Rotation Rotation::about_x(double a) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(a, Vec3::UnitX())));
}
Rotation Rotation::about_y(double a) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(a, Vec3::UnitY())));
}
Rotation Rotation::about_z(double a) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(a, Vec3::UnitZ())));
}

Rotation Rotation::exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    return Rotation(q);
  }
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(theta, omega / theta)));
}

Vec3 Rotation::log() const {
  const Vec3 v = q_.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, q_.w());
  return v * (theta / s);
}

Euler Rotation::euler() const {
  const Mat3 R = matrix();
  Euler e;
  e.pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  e.roll = std::atan2(R(2, 1), R(2, 2));
  e.yaw = std::atan2(R(1, 0), R(0, 0));
  return e;
}

double Rotation::angle_to(const Rotation& o) const {
  return (inverse() * o).log().norm();
}

Pose Pose::inverse() const {
  const Rotation r = rotation.inverse();
  return Pose{r, -(r * translation)};
}

Pose Pose::operator*(const Pose& o) const {
  return Pose{rotation * o.rotation, rotation * o.translation + translation};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
}

BearingObs BearingObs::from_direction(const Vec3& dir) {
  BearingObs b;
  b.bearing = dir.normalized();
  b.ortho = skew(b.bearing);
  return b;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

PixelObs project(const Vec3& p_cam, const CameraIntrinsics& K) {
  if (!(p_cam.z() > 0.0)) throw BehindCamera("point has non-positive depth");
  PixelObs obs;
  obs.u = K.fx * p_cam.x() / p_cam.z() + K.cx;
  obs.v = K.fy * p_cam.y() / p_cam.z() + K.cy;
  return obs;
}

Vec3 pixel_ray(double u, double v, const CameraIntrinsics& K) {
  return Vec3((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
}

Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& K) {
  return pixel_ray(u, v, K) * depth;
}

Rotation slerp(const Rotation& q0, const Rotation& q1, double t) {
  // Eigen's slerp already takes the shorter arc.
  return Rotation(q0.quaternion().slerp(t, q1.quaternion()));
}

Mat3 cam_from_body_forward() {
  Mat3 m;
  m << 0.0, -1.0, 0.0,
       0.0, 0.0, -1.0,
       1.0, 0.0, 0.0;
  return m;
}

}  // namespace fcs
