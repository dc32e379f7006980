#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcs/config.hpp"
#include "fcs/relpose.hpp"
#include "fcs/scene.hpp"
#include "fcs/time_sync.hpp"
#include "fcs/triangulate.hpp"

namespace fcs {

struct Metric {
  std::string name;
  double value = 0.0;
};
using Summary = std::vector<Metric>;

/// Estimator options for a run. Noise sigmas feed the residual weights, so
/// they are floored to keep a noiseless scenario well posed.
EstimatorOptions estimator_options(const RunConfig& cfg);

struct EstimationOutcome {
  std::vector<RelEstimate> estimates;
  std::vector<Pose> truth;  // leader-frame follower pose at each estimate time
  double position_mae = 0.0;
  double position_rmse = 0.0;
  double visual_only_mae = 0.0;
  double yaw_mae = 0.0;  // radians
  int diverged = 0;
};

EstimationOutcome run_estimation(const SensorStream& stream, const RunConfig& cfg);

/// Follower pose in the leader body frame over time.
std::vector<StampedPose> estimated_rel_track(const std::vector<RelEstimate>& estimates);
std::vector<StampedPose> truth_rel_track(const SensorStream& stream);

struct MappedLandmark {
  int window = 0;
  Landmark landmark;  // position in the world frame
  double error = 0.0;  // distance to the true point, NaN when unknown
  double anchor_depth = 0.0;
};

struct ModelMetrics {
  std::string model;
  double sample_rms = 0.0;
  double dense_rms = 0.0;
  double ucd = 0.0;
  std::vector<BandMetric> bands;
};

struct WindowMapping {
  int window = 0;
  int first_keyframe = 0;
  int keyframes = 0;
  std::size_t samples = 0;
  bool fitted = false;
  std::string fit_error;
  ExpFitParams exp_fit;
  std::vector<ModelMetrics> models;  // exponential, linear, quadratic
  double coverage_area = 0.0;
};

struct MappingOutcome {
  std::vector<MappedLandmark> landmarks;
  std::vector<WindowMapping> windows;
  DepthImage first_truth;
  DepthImage first_mono;
  DepthImage first_dense;
};

/// Windowed co-visible triangulation followed by exponential densification
/// of each window's anchor view. rel_track supplies the follower pose.
MappingOutcome run_mapping(const SensorStream& stream, const RunConfig& cfg,
                           const std::vector<StampedPose>& rel_track);

Summary estimation_summary(const EstimationOutcome& est);
Summary mapping_summary(const MappingOutcome& map);

inline const std::vector<std::string> kPipelineStages{"all", "estimation", "mapping", "analysis"};

/// Each command writes into out_dir and tags every file with the config hash.
void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir,
                  const std::string& stage = "all");
void cmd_analyze(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace fcs
