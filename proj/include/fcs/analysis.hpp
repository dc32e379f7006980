#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fcs/geom.hpp"
#include "fcs/rng.hpp"

namespace fcs {

/// Baseline position error induced by side-camera pixel noise.
struct BaselineNoiseModel {
  double baseline = 3.0;
  double focal = 380.0;
  double pixel_sigma = 1.0;

  void validate() const;
  /// (l du / f, l^2 sqrt(du^2 + dv^2) / f, l dv / f) in body axes
  /// (forward, along the baseline, vertical).
  Vec3 error(double du, double dv) const;
};

/// One draw of the baseline error with du, dv ~ N(0, pixel_sigma^2).
Vec3 perturb_baseline(const BaselineNoiseModel& model, Rng& rng);

/// A statistic over a (row, baseline) grid.
struct SweepResult {
  std::vector<double> rows;       // forward span or depth, meters
  std::vector<double> baselines;  // meters
  Eigen::MatrixXd mean;           // rows x baselines
  Eigen::MatrixXd std_error;
  Eigen::MatrixXi rejected;       // landmarks with singular geometry
  int trials = 1;
};

struct ConditionSweepConfig {
  std::vector<double> baselines{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> forward_spans{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
  double keyframe_step = 0.1;
  double depth = 30.0;
  double plane_size = 20.0;
  double plane_spacing = 0.5;
};

struct ConditionSweep {
  SweepResult costereo;                // rows = forward spans
  std::vector<double> single_agent;    // mean cond per forward span
  std::vector<int> single_rejected;    // singular landmarks per forward span
};

/// Mean cond(A^T A) over the landmark plane for two agents flying forward
/// side by side, and for the leader alone.
ConditionSweep condition_sweep(const ConditionSweepConfig& cfg);

/// Mean condition number for one camera set over one landmark plane; landmarks
/// with singular geometry are excluded and counted.
double mean_condition(const std::vector<Vec3>& centers, const std::vector<Vec3>& landmarks,
                      int* rejected = nullptr);

struct BaselineSearchConfig {
  std::vector<double> baselines{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> depths{10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0};
  int trials = 100;
  std::uint64_t seed = 42;
  double focal = 380.0;
  double pixel_sigma = 1.0;
  double plane_size = 20.0;
  double plane_spacing = 0.5;
  /// Optional front-camera pixel noise on both bearings; zero keeps the
  /// baseline error as the only perturbation.
  double front_pixel_sigma = 0.0;
};

struct BaselineSearchResult {
  SweepResult sweep;                          // rows = depths
  std::vector<double> best_baseline;          // per depth
  std::vector<Eigen::MatrixXd> per_trial;     // trials x (depths x baselines)
};

/// Monte-Carlo mean landmark error per (depth, baseline) with the follower
/// position perturbed by the baseline noise model; common random numbers
/// across cells, one derived seed per trial.
BaselineSearchResult optimal_baseline_search(const BaselineSearchConfig& cfg);

}  // namespace fcs
