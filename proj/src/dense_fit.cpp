#include "fcs/dense_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "fcs/errors.hpp"
#include "fcs/kdtree.hpp"

namespace fcs {

double ExpFitParams::eval(double d) const { return a * std::exp(b * (d - c)) - offset; }

ExpFitParams ExpFitParams::with_center(double new_c) const {
  ExpFitParams out = *this;
  out.a = a * std::exp(b * (new_c - c));
  out.c = new_c;
  return out;
}

double ExpFitParams::amplitude_at_zero() const { return a * std::exp(-b * c); }

double exp_residual(const ExpFitParams& p, const DepthSample& s) {
  return s.z - p.a * std::exp(p.b * (s.d - p.c)) + p.offset;
}

Eigen::RowVector4d exp_residual_jacobian(const ExpFitParams& p, const DepthSample& s) {
  const double e = std::exp(p.b * (s.d - p.c));
  return {-e, -p.a * e * (s.d - p.c), p.a * p.b * e, 1.0};
}

namespace {

// Exponential fit with c held at a gauge value; unknowns are (a, b, offset).
class ExpSolver {
 public:
  ExpSolver(std::span<const DepthSample> samples, double c, double guard)
      : samples_(samples), c_(c), guard_(guard) {}

  bool within_guard(double b) const {
    for (const auto& s : samples_) {
      if (std::abs(b * (s.d - c_)) > guard_) return false;
    }
    return true;
  }

  double cost(const Eigen::Vector3d& th) const {
    double sum = 0.0;
    for (const auto& s : samples_) {
      const double r = exp_residual(params(th), s);
      sum += r * r;
    }
    return sum;
  }

  ExpFitParams params(const Eigen::Vector3d& th) const {
    ExpFitParams p;
    p.a = th[0];
    p.b = th[1];
    p.c = c_;
    p.offset = th[2];
    return p;
  }

  // Returns false if the start violates the exponent guard.
  bool solve(Eigen::Vector3d& th, int max_iterations, int& iterations, double& final_cost) const {
    if (!within_guard(th[1])) return false;
    const auto n = static_cast<Eigen::Index>(samples_.size());
    Eigen::MatrixXd J(n, 3);
    Eigen::VectorXd r(n);
    double current = cost(th);
    double lambda = 1e-3;
    iterations = 0;
    for (int it = 0; it < max_iterations; ++it) {
      iterations = it + 1;
      const ExpFitParams p = params(th);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples_[static_cast<std::size_t>(i)];
        const Eigen::RowVector4d j4 = exp_residual_jacobian(p, s);
        J(i, 0) = j4[0];
        J(i, 1) = j4[1];
        J(i, 2) = j4[3];
        r[i] = exp_residual(p, s);
      }
      const Eigen::Matrix3d H = J.transpose() * J;
      const Eigen::Vector3d g = J.transpose() * r;
      if (g.cwiseAbs().maxCoeff() < 1e-300) break;

      bool accepted = false;
      Eigen::Vector3d step = Eigen::Vector3d::Zero();
      double trial_cost = current;
      while (lambda < 1e16) {
        Eigen::Matrix3d A = H;
        A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
        step = -A.ldlt().solve(g);
        const Eigen::Vector3d trial = th + step;
        if (step.allFinite() && within_guard(trial[1])) {
          trial_cost = cost(trial);
          if (trial_cost < current) {
            th = trial;
            accepted = true;
            lambda = std::max(lambda * 0.1, 1e-12);
            break;
          }
        }
        lambda *= 10.0;
      }
      if (!accepted) break;
      const double decrease = current - trial_cost;
      current = trial_cost;
      if (current < 1e-28 || decrease <= 1e-15 * current ||
          step.norm() <= 1e-15 * (th.norm() + 1e-15)) {
        break;
      }
    }
    final_cost = current;
    return true;
  }

  // Linear least squares for (a, offset) at fixed b.
  Eigen::Vector3d linear_start(double b) const {
    const auto n = static_cast<Eigen::Index>(samples_.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = samples_[static_cast<std::size_t>(i)];
      X(i, 0) = std::exp(b * (s.d - c_));
      X(i, 1) = -1.0;
      z[i] = s.z;
    }
    const Eigen::Vector2d ao = X.colPivHouseholderQr().solve(z);
    return {ao[0], b, ao[1]};
  }

  // Regression of ln(z + offset0) on (d - c), offset0 = 1 - min z.
  Eigen::Vector3d log_start() const {
    double zmin = std::numeric_limits<double>::infinity();
    for (const auto& s : samples_) zmin = std::min(zmin, s.z);
    const double off0 = 1.0 - zmin;
    const auto n = static_cast<Eigen::Index>(samples_.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = samples_[static_cast<std::size_t>(i)];
      X(i, 0) = 1.0;
      X(i, 1) = s.d - c_;
      y[i] = std::log(s.z + off0);
    }
    const Eigen::Vector2d coef = X.colPivHouseholderQr().solve(y);
    return {std::exp(coef[0]), coef[1], off0};
  }

 private:
  std::span<const DepthSample> samples_;
  double c_;
  double guard_;
};

struct FitOutcome {
  bool ok = false;
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

FitOutcome multi_start(const ExpSolver& solver, int max_iterations) {
  std::vector<Eigen::Vector3d> starts;
  starts.push_back(solver.log_start());
  for (double b : {0.01, -0.01, 0.1, -0.1, 1.0, -1.0}) starts.push_back(solver.linear_start(b));

  FitOutcome best;
  for (auto th : starts) {
    if (!th.allFinite()) continue;
    int iters = 0;
    double c = 0.0;
    if (!solver.solve(th, max_iterations, iters, c)) continue;
    if (std::isfinite(c) && c < best.cost) {
      best = FitOutcome{true, th, c, iters};
    }
  }
  return best;
}

}  // namespace

ExpFitParams fit_exponential(std::span<const DepthSample> samples, const ExpFitOptions& options) {
  if (samples.size() < ExpFitParams::kMinSamples) {
    throw InsufficientSamples("exponential fit needs at least 6 samples");
  }
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -dmin;
  double dsum = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.d) || !std::isfinite(s.z)) {
      throw InvalidArgument("non-finite depth sample");
    }
    dmin = std::min(dmin, s.d);
    dmax = std::max(dmax, s.d);
    dsum += s.d;
  }
  if (!(dmax > dmin)) throw InsufficientSamples("exponential fit needs two distinct d values");

  const double c = options.center.value_or(dsum / static_cast<double>(samples.size()));
  ExpSolver solver(samples, c, options.exponent_guard);
  FitOutcome out = multi_start(solver, options.max_iterations);
  double b_scale = 1.0;

  if (!out.ok) {
    // Rescaled retry: fit against x = (d - c) / s so |x| <= 1, then map back.
    double s = 0.0;
    for (const auto& smp : samples) s = std::max(s, std::abs(smp.d - c));
    std::vector<DepthSample> scaled(samples.begin(), samples.end());
    for (auto& smp : scaled) smp.d = (smp.d - c) / s;
    ExpSolver scaled_solver(scaled, 0.0, options.exponent_guard);
    out = multi_start(scaled_solver, options.max_iterations);
    if (!out.ok) throw IllConditioned("exponential fit exceeded the exponent guard");
    b_scale = 1.0 / s;
  }

  ExpFitParams p;
  p.a = out.theta[0];
  p.b = out.theta[1] * b_scale;
  p.c = c;
  p.offset = out.theta[2];
  p.sample_count = samples.size();
  p.iterations = out.iterations;
  p.rms = std::sqrt(out.cost / static_cast<double>(samples.size()));
  if (p.a == 0.0 || !std::isfinite(p.a) || !std::isfinite(p.b)) {
    throw IllConditioned("exponential fit produced a degenerate amplitude");
  }
  return p;
}

LinearFit fit_linear(std::span<const DepthSample> samples) {
  if (samples.size() < 2) throw InsufficientSamples("linear fit needs at least 2 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = samples[static_cast<std::size_t>(i)].d;
    X(i, 1) = 1.0;
    z[i] = samples[static_cast<std::size_t>(i)].z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < 2) throw DegenerateConfiguration("linear fit design is rank deficient");
  const Eigen::Vector2d coef = qr.solve(z);
  LinearFit f{coef[0], coef[1], 0.0};
  f.rms = std::sqrt((X * coef - z).squaredNorm() / static_cast<double>(n));
  return f;
}

QuadraticFit fit_quadratic(std::span<const DepthSample> samples) {
  if (samples.size() < 3) throw InsufficientSamples("quadratic fit needs at least 3 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = samples[static_cast<std::size_t>(i)].d;
    X(i, 0) = d * d;
    X(i, 1) = d;
    X(i, 2) = 1.0;
    z[i] = samples[static_cast<std::size_t>(i)].z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < 3) throw DegenerateConfiguration("quadratic fit design is rank deficient");
  const Eigen::Vector3d coef = qr.solve(z);
  QuadraticFit f{coef[0], coef[1], coef[2], 0.0};
  f.rms = std::sqrt((X * coef - z).squaredNorm() / static_cast<double>(n));
  return f;
}

double DepthImage::sample(double u, double v) const {
  if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const int u0 = std::min(static_cast<int>(u), width - 1);
  const int v0 = std::min(static_cast<int>(v), height - 1);
  const int u1 = std::min(u0 + 1, width - 1);
  const int v1 = std::min(v0 + 1, height - 1);
  const double fu = u - u0;
  const double fv = v - v0;
  const double top = (1.0 - fu) * at(u0, v0) + fu * at(u1, v0);
  const double bottom = (1.0 - fu) * at(u0, v1) + fu * at(u1, v1);
  return (1.0 - fv) * top + fv * bottom;
}

DepthImage apply_model(const DepthImage& mono, const std::function<double(double)>& model) {
  DepthImage out(mono.width, mono.height);
  for (std::size_t i = 0; i < mono.data.size(); ++i) {
    const double d = mono.data[i];
    if (!std::isfinite(d)) continue;
    const double z = model(d);
    if (std::isfinite(z) && z > kMinValidDepth) out.data[i] = z;
  }
  return out;
}

DepthImage apply_fit(const DepthImage& mono, const ExpFitParams& params) {
  return apply_model(mono, [&](double d) { return params.eval(d); });
}

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K, int stride) {
  PointCloud cloud;
  stride = std::max(stride, 1);
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      const double z = depth.at(u, v);
      if (std::isfinite(z)) cloud.push_back(unproject(u, v, z, K));
    }
  }
  return cloud;
}

double ucd(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.empty() || gt.empty()) throw EmptyCloud("uCD needs two non-empty clouds");
  const KdTree tree(gt);
  double sum = 0.0;
  for (const auto& p : pred) {
    double d2 = 0.0;
    tree.nearest(p, &d2);
    sum += std::sqrt(d2);
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<Vec2> convex_hull_xy(std::span<const Vec3> cloud) {
  std::vector<Vec2> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud) pts.emplace_back(p.x(), p.y());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double coverage_area(std::span<const Vec3> cloud) {
  const auto hull = convex_hull_xy(cloud);
  if (hull.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(twice);
}

int depth_band_index(double z) {
  for (std::size_t i = 0; i < kDepthBands.size(); ++i) {
    const bool last = i + 1 == kDepthBands.size();
    if (z >= kDepthBands[i].lo && (z < kDepthBands[i].hi || (last && z <= kDepthBands[i].hi))) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<BandMetric> banded_ucd(const DepthImage& pred, const DepthImage& truth,
                                   const CameraIntrinsics& K, int stride) {
  const PointCloud gt = depth_to_cloud(truth, K, stride);
  std::vector<BandMetric> out;
  for (const auto& band : kDepthBands) out.push_back(BandMetric{band, 0, 0.0});
  if (gt.empty()) throw EmptyCloud("ground-truth depth has no valid pixels");
  const KdTree tree(gt);
  stride = std::max(stride, 1);
  for (int v = 0; v < pred.height; v += stride) {
    for (int u = 0; u < pred.width; u += stride) {
      const double z = pred.at(u, v);
      const double zt = truth.at(u, v);
      if (!std::isfinite(z) || !std::isfinite(zt)) continue;
      const int band = depth_band_index(zt);
      if (band < 0) continue;
      double d2 = 0.0;
      tree.nearest(unproject(u, v, z, K), &d2);
      auto& m = out[static_cast<std::size_t>(band)];
      m.ucd += std::sqrt(d2);
      ++m.points;
    }
  }
  for (auto& m : out) {
    m.ucd = m.points > 0 ? m.ucd / static_cast<double>(m.points)
                         : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace fcs
