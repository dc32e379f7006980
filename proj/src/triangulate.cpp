#include "fcs/triangulate.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fcs/errors.hpp"
#include "fcs/scene.hpp"

namespace fcs {

ViewObs ViewObs::from_pixel(const PixelObs& px, const Pose& anchor_from_cam, const CameraIntrinsics& K) {
  ViewObs v;
  v.bearing = BearingObs::from_direction(anchor_from_cam.rotation * pixel_ray(px.u, px.v, K));
  v.center = anchor_from_cam.translation;
  return v;
}

LinearSystem stack_system(std::span<const ViewObs> views) {
  if (views.size() < 2) throw InsufficientParallax("triangulation needs at least two views");
  LinearSystem s;
  const auto n = static_cast<Eigen::Index>(views.size());
  s.A.resize(3 * n, 3);
  s.b.resize(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = views[static_cast<std::size_t>(i)];
    s.A.block<3, 3>(3 * i, 0) = v.bearing.ortho;
    s.b.segment<3>(3 * i) = v.bearing.ortho * v.center;
  }
  return s;
}

double condition_number(const Eigen::Matrix3d& AtA) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(AtA, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()[0];
  const double hi = es.eigenvalues()[2];
  if (!(hi > 0.0) || lo <= 1e-12 * hi) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Landmark solve_gated(const LinearSystem& sys, double cond_threshold) {
  Landmark lm;
  const Eigen::Matrix3d AtA = sys.A.transpose() * sys.A;
  lm.condition_number = condition_number(AtA);
  if (!std::isfinite(lm.condition_number)) {
    lm.position = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    return lm;
  }
  lm.position = AtA.ldlt().solve(sys.A.transpose() * sys.b);
  lm.accepted = lm.condition_number <= cond_threshold;
  return lm;
}

void reprojection_residuals(const Vec3& p, std::span<const PixelObs> obs,
                            std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K,
                            Eigen::VectorXd& r, Eigen::MatrixX3d* J) {
  if (obs.size() != anchor_from_cam.size()) throw InvalidArgument("one pose per observation");
  const auto n = static_cast<Eigen::Index>(obs.size());
  r.resize(2 * n);
  if (J) J->resize(2 * n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pose& T = anchor_from_cam[static_cast<std::size_t>(i)];
    const Mat3 Rt = T.rotation.matrix().transpose();
    const Vec3 pc = Rt * (p - T.translation);
    const PixelObs& o = obs[static_cast<std::size_t>(i)];
    if (!(pc.z() > 0.0)) throw BehindCamera("landmark behind an observing camera");
    r[2 * i] = K.fx * pc.x() / pc.z() + K.cx - o.u;
    r[2 * i + 1] = K.fy * pc.y() / pc.z() + K.cy - o.v;
    if (J) {
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> Jp;
      Jp << K.fx * iz, 0.0, -K.fx * pc.x() * iz * iz,
            0.0, K.fy * iz, -K.fy * pc.y() * iz * iz;
      J->block<2, 3>(2 * i, 0) = Jp * Rt;
    }
  }
}

double reprojection_rms(const Vec3& p, std::span<const PixelObs> obs,
                        std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K) {
  Eigen::VectorXd r;
  reprojection_residuals(p, obs, anchor_from_cam, K, r);
  return std::sqrt(r.squaredNorm() / static_cast<double>(obs.size()));
}

Landmark refine_gn(const Landmark& lm, std::span<const PixelObs> obs,
                   std::span<const Pose> anchor_from_cam, const CameraIntrinsics& K,
                   int max_iterations) {
  Landmark out = lm;
  out.refined = false;
  Vec3 p = lm.position;
  Eigen::VectorXd r;
  Eigen::MatrixX3d J;
  try {
    reprojection_residuals(p, obs, anchor_from_cam, K, r, &J);
  } catch (const BehindCamera&) {
    return out;
  }
  double cost = r.squaredNorm();
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::Matrix3d H = J.transpose() * J;
    const Vec3 step = -H.ldlt().solve(J.transpose() * r);
    if (!step.allFinite()) break;
    const Vec3 trial = p + step;
    Eigen::VectorXd rt;
    Eigen::MatrixX3d Jt;
    try {
      reprojection_residuals(trial, obs, anchor_from_cam, K, rt, &Jt);
    } catch (const BehindCamera&) {
      break;
    }
    const double trial_cost = rt.squaredNorm();
    if (!(trial_cost < cost)) break;
    p = trial;
    r = rt;
    J = Jt;
    out.refined = true;
    const double decrease = cost - trial_cost;
    cost = trial_cost;
    if (step.norm() < 1e-12 * (p.norm() + 1e-12) || decrease <= 1e-15 * cost) break;
  }
  out.position = p;
  return out;
}

Vec3 two_view_closed_form(const BearingObs& obs0, const BearingObs& obs1, const Vec3& center1) {
  const Mat3 M0 = obs0.ortho.transpose() * obs0.ortho;
  const Mat3 M1 = obs1.ortho.transpose() * obs1.ortho;
  const Mat3 S = M0 + M1;
  if (!std::isfinite(condition_number(S))) {
    throw SingularGeometry("parallel bearings have no unique intersection");
  }
  return S.ldlt().solve(M1 * center1);
}

std::array<double, 6> SensitivityField::mean() const {
  std::array<double, 6> m{};
  for (const auto& g : gradient) {
    for (std::size_t k = 0; k < 6; ++k) m[k] += g[k];
  }
  for (auto& v : m) v /= static_cast<double>(gradient.size());
  return m;
}

SensitivityField sensitivity_gradient(const SensitivityConfig& cfg) {
  const Mat3 Rcb = cam_from_body_forward();
  const Vec3 follower_body(0.0, -cfg.baseline, 0.0);
  const Vec3 c1 = Rcb * follower_body;

  SensitivityField field;
  field.landmarks = gen_landmark_plane(cfg.depth, cfg.plane_size, cfg.plane_spacing, 0.5 * cfg.baseline, 0.0);
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(field.landmarks.size()))));
  field.rows = n;
  field.cols = n;
  field.gradient.reserve(field.landmarks.size());

  for (const Vec3& p : field.landmarks) {
    // Observed rays stay fixed; the follower's assumed pose is perturbed.
    const BearingObs b0 = BearingObs::from_direction(p);
    const Vec3 ray1 = p - c1;
    auto solve = [&](const std::array<double, 6>& th) {
      const Vec3 t(th[0], th[1], th[2]);
      const Mat3 Rb = Rotation::from_euler(th[3], th[4], th[5]).matrix();
      const Mat3 Rc = Rcb * Rb * Rcb.transpose();
      return two_view_closed_form(b0, BearingObs::from_direction(Rc * ray1), Rcb * (follower_body + t));
    };
    std::array<double, 6> g{};
    for (std::size_t k = 0; k < 6; ++k) {
      std::array<double, 6> plus{};
      std::array<double, 6> minus{};
      plus[k] = cfg.step;
      minus[k] = -cfg.step;
      g[k] = (solve(plus) - solve(minus)).norm() / (2.0 * cfg.step);
    }
    field.gradient.push_back(g);
  }
  return field;
}

}  // namespace fcs
