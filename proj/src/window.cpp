#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fcs/errors.hpp"
#include "fcs/relpose.hpp"

namespace fcs {

namespace {

template <int N>
Eigen::Matrix<double, N, N> whitener(const Eigen::Matrix<double, N, N>& cov) {
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("residual covariance is not positive definite");
  }
  const Eigen::Matrix<double, N, N> L = llt.matrixL();
  return L.template triangularView<Eigen::Lower>().solve(Eigen::Matrix<double, N, N>::Identity());
}

}  // namespace

Eigen::VectorXd RelWindowState::pack() const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(6 * times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    x.segment<3>(static_cast<Eigen::Index>(6 * i)) = p[i];
    x.segment<3>(static_cast<Eigen::Index>(6 * i + 3)) = v[i];
  }
  return x;
}

void RelWindowState::unpack(const Eigen::VectorXd& x) {
  const std::size_t m = static_cast<std::size_t>(x.size() / 6);
  p.resize(m);
  v.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = x.segment<3>(static_cast<Eigen::Index>(6 * i));
    v[i] = x.segment<3>(static_cast<Eigen::Index>(6 * i + 3));
  }
}

Mat3 visual_covariance(const FrameMeasurement& m) {
  if (m.pnp01 && m.pnp10) return 0.25 * (m.cov01 + m.cov10);
  if (m.pnp01) return m.cov01;
  if (m.pnp10) return m.cov10;
  throw InvalidArgument("frame has no visual measurement");
}

Mat6 imu_covariance(const ResidualWeights& w, double dt) {
  // White relative acceleration from two accelerometers.
  const double q = 2.0 * w.accel_sigma * w.accel_sigma * w.imu_period;
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>() = Mat3::Identity() * (q * dt * dt * dt / 3.0);
  c.topRightCorner<3, 3>() = Mat3::Identity() * (q * dt * dt / 2.0);
  c.bottomLeftCorner<3, 3>() = Mat3::Identity() * (q * dt * dt / 2.0);
  c.bottomRightCorner<3, 3>() = Mat3::Identity() * (q * dt);
  return c;
}

WindowProblem::WindowProblem(std::vector<FrameMeasurement> frames, std::vector<RelImuDelta> links,
                             const ResidualWeights& weights, bool use_uwb, bool use_imu)
    : frames_(std::move(frames)), links_(std::move(links)), use_uwb_(use_uwb), use_imu_(use_imu) {
  if (frames_.empty()) throw InvalidArgument("empty window");
  if (use_imu_ && links_.size() + 1 != frames_.size()) {
    throw InvalidArgument("window needs one IMU link between consecutive frames");
  }
  if (use_uwb_) {
    if (!(weights.range_sigma > 0.0)) throw InvalidArgument("range sigma must be positive");
    range_whiten_ = 1.0 / weights.range_sigma;
  }
  for (const auto& f : frames_) {
    visual_whiten_.push_back(f.has_visual() ? whitener<3>(visual_covariance(f)) : Mat3::Zero());
    if (f.has_visual()) rows_ += 3;
    if (use_uwb_ && f.range) rows_ += 1;
  }
  if (use_imu_) {
    for (const auto& l : links_) {
      imu_whiten_.push_back(whitener<6>(imu_covariance(weights, l.dt)));
      rows_ += 6;
    }
  }
}

Eigen::Matrix<double, 6, 1> WindowProblem::imu_residual(const RelImuDelta& d, const Vec3& pi,
                                                        const Vec3& vi, const Vec3& pj,
                                                        const Vec3& vj) {
  Eigen::Matrix<double, 6, 1> r;
  r.head<3>() = pi + vi * d.dt + d.dp - pj;
  r.tail<3>() = vi + d.dv - vj;
  return r;
}

Eigen::Matrix<double, 6, 12> WindowProblem::imu_residual_jacobian(double dt) {
  Eigen::Matrix<double, 6, 12> J = Eigen::Matrix<double, 6, 12>::Zero();
  const Mat3 I = Mat3::Identity();
  J.block<3, 3>(0, 0) = I;
  J.block<3, 3>(0, 3) = dt * I;
  J.block<3, 3>(0, 6) = -I;
  J.block<3, 3>(3, 3) = I;
  J.block<3, 3>(3, 9) = -I;
  return J;
}

void WindowProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                             Eigen::MatrixXd* J) const {
  r.setZero(rows_);
  if (J) J->setZero(rows_, state_size());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const auto& f = frames_[i];
    const Eigen::Index col = static_cast<Eigen::Index>(6 * i);
    const Vec3 p = x.segment<3>(col);
    if (f.has_visual()) {
      const Vec3 a = f.pnp01 ? *f.pnp01 : *f.pnp10;
      const Vec3 b = f.pnp10 ? *f.pnp10 : *f.pnp01;
      r.segment<3>(row) = visual_whiten_[i] * visual_residual(a, b, p);
      if (J) J->block<3, 3>(row, col) = -visual_whiten_[i];
      row += 3;
    }
    if (use_uwb_ && f.range) {
      r[row] = range_whiten_ * uwb_residual(*f.range, p);
      if (J) J->block<1, 3>(row, col) = range_whiten_ * uwb_residual_jacobian(p);
      row += 1;
    }
  }
  if (use_imu_) {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const Eigen::Index ci = static_cast<Eigen::Index>(6 * i);
      const auto res = imu_residual(links_[i], x.segment<3>(ci), x.segment<3>(ci + 3),
                                    x.segment<3>(ci + 6), x.segment<3>(ci + 9));
      r.segment<6>(row) = imu_whiten_[i] * res;
      if (J) J->block<6, 12>(row, ci) = imu_whiten_[i] * imu_residual_jacobian(links_[i].dt);
      row += 6;
    }
  }
}

bool WindowProblem::has_visual() const {
  return std::any_of(frames_.begin(), frames_.end(),
                     [](const FrameMeasurement& f) { return f.has_visual(); });
}

double WindowProblem::cost(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  evaluate(x, r, nullptr);
  return r.squaredNorm();
}

WindowSolution solve_window(const WindowProblem& problem, const RelWindowState& init,
                            const SolverOptions& options) {
  if (init.size() != problem.frame_count()) throw InvalidArgument("initial state size mismatch");
  // Range alone cannot fix the bearing; at least one visual term is needed.
  if (!problem.has_visual()) throw Unobservable("window has no visual measurement");
  WindowSolution out;
  out.state = init;
  Eigen::VectorXd x = init.pack();
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  problem.evaluate(x, r, &J);
  double cost = r.squaredNorm();
  out.initial_cost = cost;

  double lambda = -1.0;
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (cost < 1e-30) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    const Eigen::VectorXd D = H.diagonal().cwiseMax(1e-9);
    if (lambda < 0.0) lambda = 1e-4;

    bool accepted = false;
    Eigen::VectorXd step;
    double next_cost = cost;
    while (lambda < 1e12) {
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * D;
      step = -A.ldlt().solve(g);
      if (step.allFinite()) {
        next_cost = problem.cost(x + step);
        if (next_cost < cost) {
          accepted = true;
          break;
        }
      }
      lambda *= 4.0;
    }
    if (!accepted) {
      // No descent direction left: the gradient has vanished to rounding.
      converged = true;
      break;
    }
    x += step;
    lambda = std::max(lambda / 3.0, 1e-12);
    const double decrease = cost - next_cost;
    cost = next_cost;
    problem.evaluate(x, r, &J);
    if (decrease <= options.function_tolerance * cost ||
        step.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
      converged = true;
      ++it;
      break;
    }
  }
  out.state.unpack(x);
  out.state.times = init.times;
  out.final_cost = cost;
  out.iterations = it;
  out.status = converged ? SolveStatus::kConverged : SolveStatus::kDiverged;
  return out;
}

}  // namespace fcs
