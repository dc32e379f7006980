#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fcs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Roll/pitch/yaw triple, radians, Z-Y-X convention: R = Rz(yaw) Ry(pitch) Rx(roll).
struct Euler {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// Orientation stored as a unit quaternion. Euler angles only at the edges.
class Rotation {
 public:
  Rotation() = default;
  explicit Rotation(const Eigen::Quaterniond& q);
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }
  static Rotation from_euler(const Euler& e);
  static Rotation from_euler(double roll, double pitch, double yaw) {
    return from_euler(Euler{roll, pitch, yaw});
  }
  static Rotation about_x(double a);
  static Rotation about_y(double a);
  static Rotation about_z(double a);
  /// Exponential map of an axis-angle vector.
  static Rotation exp(const Vec3& omega);

  Euler euler() const;
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }
  Vec3 log() const;

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& o) const { return Rotation(q_ * o.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Geodesic angle between two orientations, radians in [0, pi].
  double angle_to(const Rotation& o) const;

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Rigid transform x_parent = rotation * x_child + translation.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }

  Pose inverse() const;
  Pose operator*(const Pose& o) const;
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
};

struct CameraIntrinsics {
  double fx = 380.0;
  double fy = 380.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument unless f > 0 and the principal point lies inside the image.
  void validate() const;
  bool in_image(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < width && v < height;
  }
};

struct PixelObs {
  double u = 0.0;
  double v = 0.0;
  double timestamp = 0.0;
  std::int64_t feature_id = -1;
  bool valid = true;
};

/// Unit bearing and its cross-product matrix N = [b]x, which annihilates b.
struct BearingObs {
  Vec3 bearing = Vec3::UnitZ();
  Mat3 ortho = Mat3::Zero();

  static BearingObs from_direction(const Vec3& dir);
};

Mat3 skew(const Vec3& v);

/// Pinhole projection of a camera-frame point. Throws BehindCamera when z <= 0.
PixelObs project(const Vec3& p_cam, const CameraIntrinsics& K);

/// Camera-frame point at the given z-depth along the pixel ray.
Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& K);

/// Normalized image ray (x, y, 1) through a pixel.
Vec3 pixel_ray(double u, double v, const CameraIntrinsics& K);

/// Shortest-arc spherical interpolation; t in [0, 1].
Rotation slerp(const Rotation& q0, const Rotation& q1, double t);

/// Fixed rotation taking body FLU axes (x forward, y left, z up) to a
/// forward-looking RDF camera (x right, y down, z forward).
Mat3 cam_from_body_forward();

}  // namespace fcs
