#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fcs/geom.hpp"
#include "fcs/scene.hpp"

namespace fcs {

using Mat6 = Eigen::Matrix<double, 6, 6>;

struct PnpResult {
  Pose cam_from_layout;  // maps layout (owner body) coordinates into the camera
  double rms = 0.0;      // reprojection RMS, pixels
  /// Covariance of the (rotation, translation) perturbation, camera frame.
  Mat6 covariance = Mat6::Zero();
  int points = 0;
  int iterations = 0;
};

/// Pose of a planar marker layout from its pixel observations: homography
/// initialization followed by Gauss-Newton on the reprojection error.
/// Throws InsufficientObservations (< 4 valid) and DegenerateConfiguration
/// (collinear valid markers).
PnpResult pnp_planar(std::span<const PixelObs> pixels, const MarkerLayout& layout,
                     const CameraIntrinsics& K, double pixel_sigma = 1.0);

/// Averaged mutual-view residual; both estimates already expressed in the leader frame.
Vec3 visual_residual(const Vec3& pnp_01, const Vec3& pnp_10, const Vec3& p01);

/// Range residual d - |p01|.
double uwb_residual(double range, const Vec3& p01);
/// Gradient of uwb_residual with respect to p01.
Eigen::RowVector3d uwb_residual_jacobian(const Vec3& p01);

/// Double integral of the relative acceleration R01 a1 - a0 over [t0, t1].
struct RelImuDelta {
  double dt = 0.0;
  Vec3 dp = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
};

/// Sample streams are merged, linearly interpolated and integrated exactly for
/// a piecewise-linear signal. Throws MissingData when either stream leaves a
/// gap wider than two nominal periods or does not cover the interval.
RelImuDelta integrate_rel_imu(std::span<const ImuSample> leader, std::span<const ImuSample> follower,
                              const Rotation& R01, double t0, double t1, double nominal_period);

struct RelPV {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

/// Propagates relative position and velocity across one IMU interval.
RelPV imu_integrate_rel(std::span<const ImuSample> leader, std::span<const ImuSample> follower,
                        const Rotation& R01, const RelPV& state, double t0, double t1,
                        double nominal_period);
RelPV imu_predict(const RelPV& state, const RelImuDelta& delta);

/// One side of a mutual marker view, for the yaw differential.
struct MutualView {
  PixelObs center;              // the other agent's center marker
  CameraIntrinsics K;
  double roll = 0.0;
  double pitch = 0.0;
  Mat3 body_from_cam = Mat3::Identity();
  std::optional<Vec3> marker_cam;  // 3-D center marker in the camera, from PnP
};

inline constexpr double kDefaultLevelThreshold = 0.034906585039886591;  // 2 degrees

/// Horizontal view angle of the center marker, leveled when the agent is tilted.
double mutual_view_angle(const MutualView& view, bool level);

/// Relative yaw from the two agents' mutual view angles. When either agent's
/// roll or pitch exceeds the threshold both views are leveled first, which
/// needs marker_cam on both (else InsufficientInput).
double mutual_view_yaw(const MutualView& leader, const MutualView& follower,
                       double level_threshold = kDefaultLevelThreshold);

struct RollPitch {
  double roll = 0.0;
  double pitch = 0.0;
};

RollPitch rel_roll_pitch(const RollPitch& leader, const RollPitch& follower);

// ---------------------------------------------------------------------------
// Sliding-window relative position solve.

struct FrameMeasurement {
  double time = 0.0;
  std::optional<Vec3> pnp01;  // leader-side PnP, leader frame
  std::optional<Vec3> pnp10;  // follower-side PnP, rotated into the leader frame
  Mat3 cov01 = Mat3::Identity();
  Mat3 cov10 = Mat3::Identity();
  std::optional<double> range;
  bool has_visual() const { return pnp01.has_value() || pnp10.has_value(); }
};

struct ResidualWeights {
  double range_sigma = 0.05;
  double accel_sigma = 0.02;
  double imu_period = 0.005;
};

struct RelWindowState {
  std::vector<double> times;
  std::vector<Vec3> p;
  std::vector<Vec3> v;

  std::size_t size() const { return times.size(); }
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& x);
};

/// Visual residual covariance after averaging the available mutual PnPs.
Mat3 visual_covariance(const FrameMeasurement& m);
/// Covariance of one (dp, dv) IMU residual for a white relative acceleration.
Mat6 imu_covariance(const ResidualWeights& w, double dt);

/// Stacked, whitened residual of one window. Frames carry optional visual and
/// range terms; consecutive frames are linked by IMU deltas.
class WindowProblem {
 public:
  WindowProblem(std::vector<FrameMeasurement> frames, std::vector<RelImuDelta> links,
                const ResidualWeights& weights, bool use_uwb = true, bool use_imu = true);

  std::size_t frame_count() const { return frames_.size(); }
  Eigen::Index residual_size() const { return rows_; }
  Eigen::Index state_size() const { return static_cast<Eigen::Index>(6 * frames_.size()); }

  /// Whitened residual and (optionally) its Jacobian at the packed state.
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) const;
  double cost(const Eigen::VectorXd& x) const;
  bool has_visual() const;

  /// Unwhitened building blocks, exposed for Jacobian checks.
  static Eigen::Matrix<double, 6, 1> imu_residual(const RelImuDelta& d, const Vec3& pi,
                                                  const Vec3& vi, const Vec3& pj, const Vec3& vj);
  static Eigen::Matrix<double, 6, 12> imu_residual_jacobian(double dt);

 private:
  std::vector<FrameMeasurement> frames_;
  std::vector<RelImuDelta> links_;
  std::vector<Mat3> visual_whiten_;
  std::vector<Mat6> imu_whiten_;
  double range_whiten_ = 1.0;
  bool use_uwb_ = true;
  bool use_imu_ = true;
  Eigen::Index rows_ = 0;
};

enum class SolveStatus { kConverged, kDiverged };

struct WindowSolution {
  RelWindowState state;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

struct SolverOptions {
  int max_iterations = 50;
  double function_tolerance = 1e-14;
  double step_tolerance = 1e-12;
};

/// Levenberg-Marquardt on the window cost. Throws Unobservable if no frame in
/// the window carries a visual measurement.
WindowSolution solve_window(const WindowProblem& problem, const RelWindowState& init,
                            const SolverOptions& options = {});

// ---------------------------------------------------------------------------
// Streaming estimator.

struct EstimatorOptions {
  std::size_t window_size = 10;
  double level_threshold = kDefaultLevelThreshold;
  bool use_uwb = true;
  bool use_imu = true;
  double pixel_sigma = 1.0;
  ResidualWeights weights;
  SolverOptions solver;
};

/// Raw measurements of one leader frame, paired with the closest follower frame.
struct RelFrameInput {
  double time = 0.0;
  std::array<PixelObs, 5> markers_leader;  // follower markers seen by the leader
  std::optional<std::array<PixelObs, 5>> markers_follower;  // leader markers seen by the follower
  RollPitch attitude_leader;
  RollPitch attitude_follower;
  std::optional<double> range;
};

struct RelEstimate {
  double time = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Euler orientation;
  double cost = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
  std::optional<Vec3> visual_only;  // mean of the frame's PnP positions
};

class RelPoseEstimator {
 public:
  RelPoseEstimator(const AgentRig& leader, const AgentRig& follower, const CameraIntrinsics& K_side,
                   std::vector<ImuSample> imu_leader, std::vector<ImuSample> imu_follower,
                   EstimatorOptions options = {});

  RelEstimate push(const RelFrameInput& in);
  const std::deque<FrameMeasurement>& window() const { return frames_; }

 private:
  AgentRig leader_;
  AgentRig follower_;
  CameraIntrinsics K_;
  std::vector<ImuSample> imu0_;
  std::vector<ImuSample> imu1_;
  EstimatorOptions opt_;
  std::deque<FrameMeasurement> frames_;
  std::deque<RelImuDelta> links_;
  RelWindowState last_;
  std::optional<Rotation> last_R01_;
};

/// Runs the estimator over a simulated stream, pairing follower frames to
/// leader frames by nearest timestamp.
std::vector<RelEstimate> estimate_stream(const SensorStream& stream, const EstimatorOptions& options);

}  // namespace fcs
