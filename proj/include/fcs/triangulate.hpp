#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fcs/geom.hpp"

namespace fcs {

inline constexpr double kDefaultCondThreshold = 5000.0;

/// One view of a landmark: unit bearing and camera center, both in the anchor frame.
struct ViewObs {
  BearingObs bearing;
  Vec3 center = Vec3::Zero();

  static ViewObs from_pixel(const PixelObs& px, const Pose& anchor_from_cam, const CameraIntrinsics& K);
};

struct LinearSystem {
  Eigen::MatrixXd A;  // 3n x 3, stacked orthogonal-space blocks
  Eigen::VectorXd b;  // 3n
};

/// Throws InsufficientParallax with fewer than two views.
LinearSystem stack_system(std::span<const ViewObs> views);

enum class LandmarkSource { kCovisible, kSelfVio };

struct Landmark {
  std::int64_t id = -1;
  Vec3 position = Vec3::Zero();
  std::vector<int> views;
  double condition_number = 0.0;
  bool accepted = false;
  bool refined = false;
  LandmarkSource source = LandmarkSource::kCovisible;
};

/// Ratio of the extreme eigenvalues of a symmetric PSD matrix; infinity when singular.
double condition_number(const Eigen::Matrix3d& AtA);

/// Normal-equation solve with a conditioning gate. Singular systems come back
/// with an infinite condition number and accepted = false.
Landmark solve_gated(const LinearSystem& sys, double cond_threshold = kDefaultCondThreshold);

/// Pixel reprojection residuals of a point across views, and their Jacobian.
void reprojection_residuals(const Vec3& p, std::span<const PixelObs> obs,
                            std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K,
                            Eigen::VectorXd& r, Eigen::MatrixX3d* J = nullptr);
double reprojection_rms(const Vec3& p, std::span<const PixelObs> obs,
                        std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K);

/// Gauss-Newton on the reprojection error. Steps that do not lower the RMS
/// are rejected; if none is accepted the input position is kept and refined
/// stays false.
Landmark refine_gn(const Landmark& lm, std::span<const PixelObs> obs,
                   std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K,
                   int max_iterations = 10);

/// Single-pair solution with the first camera at the anchor origin. Throws
/// SingularGeometry for parallel bearings.
Vec3 two_view_closed_form(const BearingObs& obs0, const BearingObs& obs1, const Vec3& center1);

struct SensitivityConfig {
  double baseline = 3.0;
  double depth = 30.0;
  double plane_size = 20.0;
  double plane_spacing = 0.5;
  double step = 1e-4;
};

/// Per-landmark central-difference gradient of the triangulated position
/// magnitude change with respect to the follower camera's
/// [t_x, t_y, t_z, R_x, R_y, R_z] in body axes (x forward, y left, z up).
struct SensitivityField {
  int rows = 0;  // vertical grid lines
  int cols = 0;  // lateral grid lines
  std::vector<Vec3> landmarks;                  // anchor frame, row-major
  std::vector<std::array<double, 6>> gradient;  // same order

  const std::array<double, 6>& at(int row, int col) const {
    return gradient[static_cast<std::size_t>(row * cols + col)];
  }
  std::array<double, 6> mean() const;
};

SensitivityField sensitivity_gradient(const SensitivityConfig& cfg);

}  // namespace fcs
