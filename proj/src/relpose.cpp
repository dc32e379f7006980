#include "fcs/relpose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

struct PlaneBasis {
  Vec3 origin;
  Vec3 e1;
  Vec3 e2;
  Vec3 normal;
};

PlaneBasis layout_basis(const MarkerLayout& layout) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : layout.points) centroid += p;
  centroid /= static_cast<double>(layout.points.size());
  Eigen::Matrix<double, 5, 3> centered;
  for (int i = 0; i < 5; ++i) centered.row(i) = (layout.points[static_cast<std::size_t>(i)] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::Matrix<double, 5, 3>> svd(centered, Eigen::ComputeFullV);
  if (svd.singularValues()[1] <= 1e-9 * std::max(svd.singularValues()[0], 1e-300)) {
    throw DegenerateConfiguration("marker layout is collinear");
  }
  PlaneBasis b;
  b.origin = centroid;
  b.e1 = svd.matrixV().col(0);
  b.e2 = svd.matrixV().col(1);
  b.normal = b.e1.cross(b.e2);
  return b;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& pc, const CameraIntrinsics& K) {
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> J;
  J << K.fx * iz, 0.0, -K.fx * pc.x() * iz * iz,
       0.0, K.fy * iz, -K.fy * pc.y() * iz * iz;
  return J;
}

// Linear interpolation inside a sample stream. Caller guarantees coverage.
Vec3 accel_at(std::span<const ImuSample> s, double t) {
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const ImuSample& a, double x) { return a.time < x; });
  if (it == s.end()) return s.back().accel;
  if (it->time == t || it == s.begin()) return it->accel;
  const auto& b = *it;
  const auto& a = *std::prev(it);
  const double w = (t - a.time) / (b.time - a.time);
  return (1.0 - w) * a.accel + w * b.accel;
}

void check_coverage(std::span<const ImuSample> s, double t0, double t1, double period) {
  if (s.empty() || s.front().time > t0 || s.back().time < t1) {
    throw MissingData("IMU samples do not cover the integration interval");
  }
  auto it = std::upper_bound(s.begin(), s.end(), t0,
                             [](double x, const ImuSample& a) { return x < a.time; });
  if (it != s.begin()) --it;
  for (; std::next(it) != s.end() && it->time < t1; ++it) {
    if (std::next(it)->time - it->time > 2.0 * period) {
      throw MissingData("IMU gap wider than two sample periods");
    }
  }
}

}  // namespace

PnpResult pnp_planar(std::span<const PixelObs> pixels, const MarkerLayout& layout,
                     const CameraIntrinsics& K, double pixel_sigma) {
  std::vector<Vec3> pts;
  std::vector<Vec2> uv;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!pixels[i].valid) continue;
    const auto id = pixels[i].feature_id >= 0 ? static_cast<std::size_t>(pixels[i].feature_id) : i;
    if (id >= layout.points.size()) continue;
    pts.push_back(layout.points[id]);
    uv.emplace_back(pixels[i].u, pixels[i].v);
  }
  if (pts.size() < 4) throw InsufficientObservations("planar PnP needs at least 4 valid markers");

  const PlaneBasis basis = layout_basis(layout);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd plane(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 d = pts[static_cast<std::size_t>(i)] - basis.origin;
    plane(i, 0) = d.dot(basis.e1);
    plane(i, 1) = d.dot(basis.e2);
  }
  {
    const Eigen::RowVector2d mean = plane.colwise().mean();
    const Eigen::MatrixXd c = plane.rowwise() - mean;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c.transpose() * c);
    if (es.eigenvalues()[0] <= 1e-10 * std::max(es.eigenvalues()[1], 1e-300)) {
      throw DegenerateConfiguration("valid markers are collinear");
    }
  }

  // Homography from scaled plane coordinates to normalized image coordinates.
  const double scale = std::max(plane.cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXd A(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = plane(i, 0) / scale;
    const double t = plane(i, 1) / scale;
    const double x = (uv[static_cast<std::size_t>(i)].x() - K.cx) / K.fx;
    const double y = (uv[static_cast<std::size_t>(i)].y() - K.cy) / K.fy;
    A.row(2 * i) << s, t, 1.0, 0.0, 0.0, 0.0, -x * s, -x * t, -x;
    A.row(2 * i + 1) << 0.0, 0.0, 0.0, s, t, 1.0, -y * s, -y * t, -y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 H;
  H << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  H.col(0) /= scale;
  H.col(1) /= scale;

  double lambda = 2.0 / (H.col(0).norm() + H.col(1).norm());
  if (lambda * H(2, 2) < 0.0) lambda = -lambda;
  Mat3 Rp;
  Rp.col(0) = lambda * H.col(0);
  Rp.col(1) = lambda * H.col(1);
  Rp.col(2) = Rp.col(0).cross(Rp.col(1));
  Rp = nearest_rotation(Rp);
  Mat3 basis_m;
  basis_m << basis.e1, basis.e2, basis.normal;
  Mat3 R = Rp * basis_m.transpose();
  Vec3 t = lambda * H.col(2) - R * basis.origin;

  auto residuals = [&](const Mat3& Rc, const Vec3& tc, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(2 * n);
    if (J) J->resize(2 * n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 rp = Rc * pts[static_cast<std::size_t>(i)];
      const Vec3 pc = rp + tc;
      if (pc.z() <= 0.0) return false;
      r[2 * i] = K.fx * pc.x() / pc.z() + K.cx - uv[static_cast<std::size_t>(i)].x();
      r[2 * i + 1] = K.fy * pc.y() / pc.z() + K.cy - uv[static_cast<std::size_t>(i)].y();
      if (J) {
        const Eigen::Matrix<double, 2, 3> Jp = projection_jacobian(pc, K);
        J->block<2, 3>(2 * i, 0) = -Jp * skew(rp);
        J->block<2, 3>(2 * i, 3) = Jp;
      }
    }
    return true;
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  if (!residuals(R, t, r, &J)) {
    throw DegenerateConfiguration("PnP initialization places markers behind the camera");
  }
  double cost = r.squaredNorm();
  int iters = 0;
  for (int it = 0; it < 30; ++it) {
    iters = it + 1;
    const Mat6 H6 = J.transpose() * J;
    const Eigen::Matrix<double, 6, 1> g = J.transpose() * r;
    Eigen::Matrix<double, 6, 1> step = -H6.ldlt().solve(g);
    if (!step.allFinite()) break;
    bool accepted = false;
    for (int k = 0; k < 12 && !accepted; ++k) {
      const Mat3 Rn = Rotation::exp(step.head<3>()).matrix() * R;
      const Vec3 tn = t + step.tail<3>();
      Eigen::VectorXd rn;
      if (residuals(Rn, tn, rn, nullptr) && rn.squaredNorm() <= cost) {
        R = Rn;
        t = tn;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
    residuals(R, t, r, &J);
    const double next = r.squaredNorm();
    const bool small_step = step.norm() < 1e-13;
    const bool flat = cost - next <= 1e-16 * cost;
    cost = next;
    if (small_step || flat || cost < 1e-28) break;
  }

  PnpResult out;
  out.cam_from_layout = Pose{Rotation(R), t};
  out.rms = std::sqrt(cost / static_cast<double>(n));
  out.points = static_cast<int>(n);
  out.iterations = iters;
  const Mat6 info = J.transpose() * J;
  out.covariance = pixel_sigma * pixel_sigma * info.inverse();
  return out;
}

Vec3 visual_residual(const Vec3& pnp_01, const Vec3& pnp_10, const Vec3& p01) {
  return 0.5 * (pnp_01 - p01) + 0.5 * (pnp_10 - p01);
}

double uwb_residual(double range, const Vec3& p01) { return range - p01.norm(); }

Eigen::RowVector3d uwb_residual_jacobian(const Vec3& p01) {
  const double n = p01.norm();
  if (n < 1e-12) return Eigen::RowVector3d::Zero();
  return -p01.transpose() / n;
}

RelImuDelta integrate_rel_imu(std::span<const ImuSample> leader, std::span<const ImuSample> follower,
                              const Rotation& R01, double t0, double t1, double nominal_period) {
  if (!(t1 > t0)) throw InvalidArgument("IMU interval must have positive length");
  check_coverage(leader, t0, t1, nominal_period);
  check_coverage(follower, t0, t1, nominal_period);

  std::vector<double> knots{t0, t1};
  for (const auto& s : leader) {
    if (s.time > t0 && s.time < t1) knots.push_back(s.time);
  }
  for (const auto& s : follower) {
    if (s.time > t0 && s.time < t1) knots.push_back(s.time);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  const Mat3 R = R01.matrix();
  auto rel = [&](double t) -> Vec3 { return R * accel_at(follower, t) - accel_at(leader, t); };

  RelImuDelta d;
  d.dt = t1 - t0;
  Vec3 ra = rel(knots.front());
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const double h = knots[i] - knots[i - 1];
    const Vec3 rb = rel(knots[i]);
    // Exact for an acceleration that is linear on the sub-interval.
    d.dp += d.dv * h + h * h * (2.0 * ra + rb) / 6.0;
    d.dv += 0.5 * h * (ra + rb);
    ra = rb;
  }
  return d;
}

RelPV imu_predict(const RelPV& s, const RelImuDelta& d) {
  return RelPV{s.p + s.v * d.dt + d.dp, s.v + d.dv};
}

RelPV imu_integrate_rel(std::span<const ImuSample> leader, std::span<const ImuSample> follower,
                        const Rotation& R01, const RelPV& state, double t0, double t1,
                        double nominal_period) {
  return imu_predict(state, integrate_rel_imu(leader, follower, R01, t0, t1, nominal_period));
}

double mutual_view_angle(const MutualView& view, bool level) {
  if (!level) return std::atan((view.center.u - view.K.cx) / view.K.fx);
  if (!view.marker_cam) throw InsufficientInput("leveling needs the 3-D center marker");
  const Mat3 level_from_body = (Rotation::about_y(view.pitch) * Rotation::about_x(view.roll)).matrix();
  const Vec3 p = view.body_from_cam.transpose() * level_from_body * view.body_from_cam * *view.marker_cam;
  if (!(p.z() > 0.0)) throw BehindCamera("leveled marker lies behind the camera");
  return std::atan(p.x() / p.z());
}

double mutual_view_yaw(const MutualView& leader, const MutualView& follower, double level_threshold) {
  const double tilt = std::max({std::abs(leader.roll), std::abs(leader.pitch),
                                std::abs(follower.roll), std::abs(follower.pitch)});
  const bool level = tilt > level_threshold;
  return wrap_angle(mutual_view_angle(follower, level) - mutual_view_angle(leader, level));
}

RollPitch rel_roll_pitch(const RollPitch& leader, const RollPitch& follower) {
  return {wrap_angle(follower.roll - leader.roll), wrap_angle(follower.pitch - leader.pitch)};
}

}  // namespace fcs
