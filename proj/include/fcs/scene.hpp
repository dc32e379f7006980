#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fcs/dense_fit.hpp"
#include "fcs/geom.hpp"
#include "fcs/rng.hpp"
#include "fcs/time_sync.hpp"

namespace fcs {

/// Everything the simulator needs to produce one two-agent flight. World frame
/// is the leader body (FLU) at t = 0; the follower flies on the leader's right.
struct ScenarioConfig {
  std::uint64_t rng_seed = 42;
  double baseline_m = 3.0;
  double forward_span_m = 10.0;
  double keyframe_step_m = 0.1;
  double forward_speed_mps = 1.0;
  double plane_depth_m = 30.0;
  double plane_size_m = 20.0;
  double plane_spacing_m = 0.5;
  double pixel_noise_sigma = 1.0;      // side-camera marker pixels
  double feature_pixel_sigma = 0.5;    // front-camera features
  double uwb_noise_sigma = 0.05;
  double accel_noise_sigma = 0.02;
  double attitude_noise_deg = 0.0;     // roll/pitch readings
  double frame_rate_hz = 30.0;
  double imu_rate_hz = 200.0;
  double follower_yaw_deg = 5.0;
  double wobble_forward_m = 0.05;
  double wobble_lateral_m = 0.1;
  double wobble_vertical_m = 0.05;
  double wobble_freq_hz = 0.5;
  double exposure_offset_s = 0.004;    // follower cameras lag the leader
  double exposure_jitter_s = 0.0005;
  double odometry_drift_sigma = 0.0;   // leader random-walk drift per sqrt(s)
  double flight_height_m = 2.0;
  double backdrop_depth_m = 65.0;
  int vio_points_per_keyframe = 6;
  double vio_noise_sigma = 0.05;
  ExpFitParams mono_warp{4.0, 0.6, 0.0, 2.0};
  double mono_noise_sigma = 0.0;
  CameraIntrinsics intrinsics_front;
  CameraIntrinsics intrinsics_side;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t keyframe_count() const;
  double duration() const { return forward_span_m / forward_speed_mps; }
};

/// Five coplanar markers in the owner's body frame; index 0 is the center.
struct MarkerLayout {
  std::array<Vec3, 5> points;
  static constexpr int kCenter = 0;

  /// Center plus the corners of a square of the given side on the plane y = y_face.
  static MarkerLayout side_square(double y_face, double side = 0.12);
  const Vec3& center() const { return points[kCenter]; }
};

struct AgentRig {
  Pose body_from_front;
  Pose body_from_side;
  MarkerLayout markers;
};

/// Agent 0 (leader) looks right with its side camera, agent 1 looks left.
AgentRig make_rig(int agent);

/// Ground, the landmark wall, and a far backdrop, all axis-aligned in the world frame.
struct SceneGeometry {
  double ground_z = -2.0;
  double wall_x = 30.0;
  double wall_y_center = -1.5;
  double wall_half_width = 10.0;
  double wall_top_z = 18.0;
  double backdrop_x = 65.0;

  static SceneGeometry from_config(const ScenarioConfig& cfg);
  /// Smallest t > 0 with origin + t dir on a surface; infinity if none.
  double raycast(const Vec3& origin, const Vec3& dir) const;
  bool visible(const Vec3& origin, const Vec3& point) const;
};

/// Per-pixel z-depth seen by a camera, by ray casting the scene.
DepthImage render_depth(const SceneGeometry& scene, const Pose& world_from_cam,
                        const CameraIntrinsics& K);

/// Grid of (floor(size/spacing)+1)^2 points on the plane z = depth of a
/// forward camera frame, centered at (center_x, center_y).
std::vector<Vec3> gen_landmark_plane(double depth, double size, double spacing,
                                     double center_x = 0.0, double center_y = 0.0);

/// Monocular-network stand-in: the exact inverse of the exponential depth model,
/// d = c + ln((z + offset) / a) / b, plus optional Gaussian noise.
DepthImage synth_monodepth(const DepthImage& true_depth, const ExpFitParams& warp,
                           double noise_sigma = 0.0, Rng* rng = nullptr);

/// Projects the target's markers into an observer camera. Markers behind the
/// camera or outside the image are returned with valid = false.
std::array<PixelObs, 5> observe_markers(const Pose& world_from_cam, const Pose& world_from_target,
                                        const MarkerLayout& layout, const CameraIntrinsics& K,
                                        double sigma, Rng& rng, double time = 0.0);

/// Ground-truth body pose and gravity-free world acceleration of an agent.
Pose true_body_pose(const ScenarioConfig& cfg, int agent, double t);
Vec3 true_world_accel(const ScenarioConfig& cfg, int agent, double t);

struct ImuSample {
  double time = 0.0;
  Vec3 accel = Vec3::Zero();  // body frame, gravity compensated
};

struct RangeSample {
  double time = 0.0;
  double range = 0.0;
};

struct SideFrame {
  double time = 0.0;
  std::array<PixelObs, 5> markers;  // the other agent's markers
  Euler attitude;                   // measured roll/pitch; yaw is truth
  Pose truth;
};

struct FrontFrame {
  double time = 0.0;
  int keyframe = 0;
  std::vector<PixelObs> features;  // feature_id = landmark index
  Pose truth;
};

struct AgentStream {
  std::vector<SideFrame> side;
  std::vector<ImuSample> imu;
  std::vector<FrontFrame> front;
};

struct SensorStream {
  ScenarioConfig config;
  std::array<AgentStream, 2> agents;
  std::vector<RangeSample> uwb;                 // at leader side-frame times
  std::vector<Vec3> landmarks;                  // co-visible candidates, world frame
  std::vector<std::vector<Vec3>> vio_points;    // leader near-field points per keyframe, world
  std::vector<StampedPose> leader_odometry;     // truth plus drift, at leader side-frame times
  SceneGeometry scene;
};

/// Two agents flying parallel at a lateral separation of baseline_m, with all
/// sensor channels populated from seeded noise streams.
SensorStream gen_parallel_flight(const ScenarioConfig& cfg);

}  // namespace fcs
