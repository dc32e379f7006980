#include "fcs/analysis.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fcs/errors.hpp"
#include "fcs/scene.hpp"
#include "fcs/triangulate.hpp"

namespace fcs {

void BaselineNoiseModel::validate() const {
  if (!(baseline > 0.0) || !(focal > 0.0)) {
    throw InvalidArgument("baseline noise model needs positive baseline and focal length");
  }
}

Vec3 BaselineNoiseModel::error(double du, double dv) const {
  return Vec3(baseline * du / focal, baseline * baseline * std::hypot(du, dv) / focal,
              baseline * dv / focal);
}

Vec3 perturb_baseline(const BaselineNoiseModel& model, Rng& rng) {
  model.validate();
  const double du = rng.gauss(model.pixel_sigma);
  const double dv = rng.gauss(model.pixel_sigma);
  return model.error(du, dv);
}

double mean_condition(const std::vector<Vec3>& centers, const std::vector<Vec3>& landmarks,
                      int* rejected) {
  double sum = 0.0;
  int count = 0;
  int bad = 0;
  for (const Vec3& p : landmarks) {
    // A^T A = sum of N^T N = sum of (I - b b^T) for unit bearings.
    Mat3 M = Mat3::Zero();
    for (const Vec3& c : centers) {
      const Vec3 b = (p - c).normalized();
      M += Mat3::Identity() - b * b.transpose();
    }
    const double k = condition_number(M);
    if (std::isfinite(k)) {
      sum += k;
      ++count;
    } else {
      ++bad;
    }
  }
  if (rejected) *rejected = bad;
  return count > 0 ? sum / count : std::numeric_limits<double>::infinity();
}

ConditionSweep condition_sweep(const ConditionSweepConfig& cfg) {
  ConditionSweep out;
  auto& s = out.costereo;
  s.rows = cfg.forward_spans;
  s.baselines = cfg.baselines;
  const auto R = static_cast<Eigen::Index>(cfg.forward_spans.size());
  const auto C = static_cast<Eigen::Index>(cfg.baselines.size());
  s.mean.resize(R, C);
  s.std_error = Eigen::MatrixXd::Zero(R, C);
  s.rejected = Eigen::MatrixXi::Zero(R, C);

  // Forward motion is along the camera z axis of the anchor frame.
  auto track = [&](double lateral, double span) {
    std::vector<Vec3> centers;
    const int n = static_cast<int>(std::floor(span / cfg.keyframe_step + 1e-9));
    for (int k = 0; k <= n; ++k) centers.emplace_back(lateral, 0.0, k * cfg.keyframe_step);
    return centers;
  };

  for (Eigen::Index i = 0; i < R; ++i) {
    const double span = cfg.forward_spans[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < C; ++j) {
      const double l = cfg.baselines[static_cast<std::size_t>(j)];
      auto centers = track(0.0, span);
      const auto follower = track(l, span);
      centers.insert(centers.end(), follower.begin(), follower.end());
      const auto plane = gen_landmark_plane(cfg.depth, cfg.plane_size, cfg.plane_spacing, 0.5 * l, 0.0);
      int bad = 0;
      s.mean(i, j) = mean_condition(centers, plane, &bad);
      s.rejected(i, j) = bad;
    }
    const auto plane = gen_landmark_plane(cfg.depth, cfg.plane_size, cfg.plane_spacing, 0.0, 0.0);
    int bad = 0;
    out.single_agent.push_back(mean_condition(track(0.0, span), plane, &bad));
    out.single_rejected.push_back(bad);
  }
  return out;
}

BaselineSearchResult optimal_baseline_search(const BaselineSearchConfig& cfg) {
  if (cfg.trials < 1) throw InvalidArgument("baseline search needs at least one trial");
  const Mat3 Rcb = cam_from_body_forward();
  const auto R = static_cast<Eigen::Index>(cfg.depths.size());
  const auto C = static_cast<Eigen::Index>(cfg.baselines.size());

  BaselineSearchResult out;
  out.sweep.rows = cfg.depths;
  out.sweep.baselines = cfg.baselines;
  out.sweep.trials = cfg.trials;
  out.sweep.rejected = Eigen::MatrixXi::Zero(R, C);
  out.per_trial.reserve(static_cast<std::size_t>(cfg.trials));

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    Rng rng(trial_seed);
    const double du = rng.gauss(cfg.pixel_sigma);
    const double dv = rng.gauss(cfg.pixel_sigma);
    Eigen::MatrixXd err(R, C);
    for (Eigen::Index j = 0; j < C; ++j) {
      const double l = cfg.baselines[static_cast<std::size_t>(j)];
      const BaselineNoiseModel model{l, cfg.focal, cfg.pixel_sigma};
      const Vec3 c1 = Rcb * Vec3(0.0, -l, 0.0);
      const Vec3 c1_noisy = c1 + Rcb * model.error(du, dv);
      for (Eigen::Index i = 0; i < R; ++i) {
        const double depth = cfg.depths[static_cast<std::size_t>(i)];
        const auto plane = gen_landmark_plane(depth, cfg.plane_size, cfg.plane_spacing, 0.5 * l, 0.0);
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(plane.size()))));
        double sum = 0.0;
        int used = 0;
        for (std::size_t k = 0; k < plane.size(); ++k) {
          const Vec3& p = plane[k];
          Vec3 r0 = p;
          Vec3 r1 = p - c1;
          if (cfg.front_pixel_sigma > 0.0) {
            // Per-landmark stream keyed by grid position keeps the result order independent.
            const int gy = static_cast<int>(k) / n;
            const int gx = static_cast<int>(k) % n;
            Rng px(derive_seed(trial_seed, static_cast<std::uint64_t>(gy * 4096 + gx),
                               static_cast<std::uint64_t>(i * 64 + j)));
            const double s = cfg.front_pixel_sigma / cfg.focal;
            r0 = Vec3(r0.x() / r0.z() + px.gauss(s), r0.y() / r0.z() + px.gauss(s), 1.0);
            r1 = Vec3(r1.x() / r1.z() + px.gauss(s), r1.y() / r1.z() + px.gauss(s), 1.0);
          }
          try {
            const Vec3 est = two_view_closed_form(BearingObs::from_direction(r0),
                                                  BearingObs::from_direction(r1), c1_noisy);
            sum += (est - p).norm();
            ++used;
          } catch (const SingularGeometry&) {
            if (trial == 0) ++out.sweep.rejected(i, j);
          }
        }
        err(i, j) = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.per_trial.push_back(std::move(err));
  }

  out.sweep.mean = Eigen::MatrixXd::Zero(R, C);
  for (const auto& e : out.per_trial) out.sweep.mean += e;
  out.sweep.mean /= static_cast<double>(cfg.trials);
  out.sweep.std_error = Eigen::MatrixXd::Zero(R, C);
  if (cfg.trials > 1) {
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(R, C);
    for (const auto& e : out.per_trial) var += (e - out.sweep.mean).cwiseAbs2();
    var /= static_cast<double>(cfg.trials - 1);
    out.sweep.std_error = (var / static_cast<double>(cfg.trials)).cwiseSqrt();
  }
  for (Eigen::Index i = 0; i < R; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < C; ++j) {
      if (out.sweep.mean(i, j) < out.sweep.mean(i, best)) best = j;
    }
    out.best_baseline.push_back(cfg.baselines[static_cast<std::size_t>(best)]);
  }
  return out;
}

}  // namespace fcs
