#include <algorithm>
#include <cmath>

#include "fcs/errors.hpp"
#include "fcs/relpose.hpp"
#include "fcs/time_sync.hpp"

namespace fcs {

namespace {

// Position of the observed agent's body origin in the observer's body frame.
struct MarkerFix {
  Vec3 position;
  Mat3 covariance;
  Vec3 marker_cam;
};

std::optional<MarkerFix> marker_fix(std::span<const PixelObs> markers, const AgentRig& observer,
                                    const AgentRig& target, const CameraIntrinsics& K,
                                    double pixel_sigma) {
  try {
    const PnpResult pnp = pnp_planar(markers, target.markers, K, pixel_sigma);
    const Mat3 Rbc = observer.body_from_side.rotation.matrix();
    MarkerFix v;
    v.position = observer.body_from_side * pnp.cam_from_layout.translation;
    v.covariance = Rbc * pnp.covariance.bottomRightCorner<3, 3>() * Rbc.transpose();
    v.marker_cam = pnp.cam_from_layout * target.markers.center();
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

RelPoseEstimator::RelPoseEstimator(const AgentRig& leader, const AgentRig& follower,
                                   const CameraIntrinsics& K_side, std::vector<ImuSample> imu_leader,
                                   std::vector<ImuSample> imu_follower, EstimatorOptions options)
    : leader_(leader),
      follower_(follower),
      K_(K_side),
      imu0_(std::move(imu_leader)),
      imu1_(std::move(imu_follower)),
      opt_(options) {
  if (opt_.window_size < 2) throw InvalidArgument("window size must be at least 2");
}

RelEstimate RelPoseEstimator::push(const RelFrameInput& in) {
  const auto view0 = marker_fix(in.markers_leader, leader_, follower_, K_, opt_.pixel_sigma);
  std::optional<MarkerFix> view1;
  if (in.markers_follower) {
    view1 = marker_fix(*in.markers_follower, follower_, leader_, K_, opt_.pixel_sigma);
  }

  // Orientation: yaw from the mutual view angles, roll/pitch by differencing.
  const RollPitch rp = rel_roll_pitch(in.attitude_leader, in.attitude_follower);
  double yaw = last_R01_ ? last_R01_->euler().yaw : 0.0;
  const PixelObs& c0 = in.markers_leader[MarkerLayout::kCenter];
  if (in.markers_follower && c0.valid && (*in.markers_follower)[MarkerLayout::kCenter].valid) {
    MutualView b0{c0, K_, in.attitude_leader.roll, in.attitude_leader.pitch,
                  leader_.body_from_side.rotation.matrix(), std::nullopt};
    MutualView b1{(*in.markers_follower)[MarkerLayout::kCenter], K_, in.attitude_follower.roll,
                  in.attitude_follower.pitch, follower_.body_from_side.rotation.matrix(), std::nullopt};
    if (view0) b0.marker_cam = view0->marker_cam;
    if (view1) b1.marker_cam = view1->marker_cam;
    try {
      yaw = mutual_view_yaw(b0, b1, opt_.level_threshold);
    } catch (const Error&) {
      // Keep the previous yaw when the leveled path lacks its 3-D inputs.
    }
  }
  const Rotation R01 = Rotation::from_euler(rp.roll, rp.pitch, yaw);

  FrameMeasurement m;
  m.time = in.time;
  if (view0) {
    m.pnp01 = view0->position;
    m.cov01 = view0->covariance;
  }
  if (view1) {
    const Mat3 R = R01.matrix();
    m.pnp10 = -(R * view1->position);
    m.cov10 = R * view1->covariance * R.transpose();
  }
  if (opt_.use_uwb && in.range) m.range = in.range;

  // Initial guess for the new frame: IMU prediction from the previous solution.
  RelPV guess;
  if (!frames_.empty()) {
    const RelImuDelta link = integrate_rel_imu(imu0_, imu1_, last_R01_.value_or(R01),
                                               frames_.back().time, in.time, opt_.weights.imu_period);
    links_.push_back(link);
    guess = imu_predict(RelPV{last_.p.back(), last_.v.back()}, link);
  }
  if (frames_.empty() || last_.p.empty()) {
    if (m.has_visual()) {
      guess.p = m.pnp01 && m.pnp10 ? 0.5 * (*m.pnp01 + *m.pnp10) : (m.pnp01 ? *m.pnp01 : *m.pnp10);
    } else if (m.range) {
      guess.p = Vec3(0.0, -*m.range, 0.0);
    }
  }
  frames_.push_back(m);
  if (frames_.size() > opt_.window_size) {
    frames_.pop_front();
    links_.pop_front();
  }
  last_R01_ = R01;

  RelWindowState init;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    init.times.push_back(frames_[i].time);
    // Previous solution covers every frame but the newest (shifted by one once full).
    const std::size_t offset = last_.p.size() + 1 > frames_.size() ? 1 : 0;
    const std::size_t j = i + offset;
    if (i + 1 < frames_.size() && j < last_.p.size()) {
      init.p.push_back(last_.p[j]);
      init.v.push_back(last_.v[j]);
    } else {
      init.p.push_back(guess.p);
      init.v.push_back(guess.v);
    }
  }

  RelEstimate est;
  est.time = in.time;
  const Euler e{rp.roll, rp.pitch, yaw};
  est.orientation = e;
  if (m.has_visual()) {
    est.visual_only = m.pnp01 && m.pnp10 ? 0.5 * (*m.pnp01 + *m.pnp10)
                                         : (m.pnp01 ? *m.pnp01 : *m.pnp10);
  }
  try {
    std::vector<FrameMeasurement> fr(frames_.begin(), frames_.end());
    std::vector<RelImuDelta> lk(links_.begin(), links_.end());
    WindowProblem problem(std::move(fr), std::move(lk), opt_.weights, opt_.use_uwb, opt_.use_imu);
    const WindowSolution sol = solve_window(problem, init, opt_.solver);
    last_ = sol.state;
    est.p = sol.state.p.back();
    est.v = sol.state.v.back();
    est.cost = sol.final_cost;
    est.iterations = sol.iterations;
    est.status = sol.status;
  } catch (const Unobservable&) {
    last_ = init;
    est.p = guess.p;
    est.v = guess.v;
    est.cost = std::numeric_limits<double>::quiet_NaN();
    est.status = SolveStatus::kDiverged;
  }
  return est;
}

std::vector<RelEstimate> estimate_stream(const SensorStream& stream, const EstimatorOptions& options) {
  const auto& side0 = stream.agents[0].side;
  const auto& side1 = stream.agents[1].side;
  std::vector<double> t0, t1;
  for (const auto& f : side0) t0.push_back(f.time);
  for (const auto& f : side1) t1.push_back(f.time);
  const auto pairs = pair_nearest_timestamp(t0, t1);
  std::vector<std::optional<std::size_t>> partner(side0.size());
  for (const auto& p : pairs) partner[p.index_a] = p.index_b;

  RelPoseEstimator est(make_rig(0), make_rig(1), stream.config.intrinsics_side,
                       stream.agents[0].imu, stream.agents[1].imu, options);
  std::vector<RelEstimate> out;
  out.reserve(side0.size());
  RollPitch last_follower;
  for (std::size_t n = 0; n < side0.size(); ++n) {
    RelFrameInput in;
    in.time = side0[n].time;
    in.markers_leader = side0[n].markers;
    in.attitude_leader = {side0[n].attitude.roll, side0[n].attitude.pitch};
    if (partner[n]) {
      const auto& f = side1[*partner[n]];
      in.markers_follower = f.markers;
      last_follower = {f.attitude.roll, f.attitude.pitch};
    }
    in.attitude_follower = last_follower;
    if (n < stream.uwb.size()) in.range = stream.uwb[n].range;
    out.push_back(est.push(in));
  }
  return out;
}

}  // namespace fcs
