#include <gtest/gtest.h>

#include <cmath>

#include "fcs/errors.hpp"
#include "fcs/scene.hpp"

namespace fcs {
namespace {

ScenarioConfig noiseless() {
  ScenarioConfig c;
  c.pixel_noise_sigma = 0.0;
  c.feature_pixel_sigma = 0.0;
  c.uwb_noise_sigma = 0.0;
  c.accel_noise_sigma = 0.0;
  c.exposure_offset_s = 0.0;
  c.exposure_jitter_s = 0.0;
  c.vio_noise_sigma = 0.0;
  c.plane_spacing_m = 2.0;
  return c;
}

TEST(Scenario, KeyframeCountIsSpanOverStepPlusOne) {
  ScenarioConfig c;
  EXPECT_EQ(c.keyframe_count(), 101u);
  c.plane_spacing_m = 2.0;
  const SensorStream s = gen_parallel_flight(c);
  EXPECT_EQ(s.agents[0].front.size(), 101u);
  EXPECT_EQ(s.agents[1].front.size(), 101u);
}

TEST(Scenario, ValidationNamesTheField) {
  ScenarioConfig c;
  c.baseline_m = -1.0;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scenario.baseline_m"), std::string::npos);
  }
  c = ScenarioConfig{};
  c.keyframe_step_m = 20.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LandmarkPlane, GridCounts) {
  EXPECT_EQ(gen_landmark_plane(30, 20, 0.5).size(), 1681u);
  const auto corners = gen_landmark_plane(30, 20, 20);
  ASSERT_EQ(corners.size(), 4u);
  EXPECT_EQ(corners[0], Vec3(-10, -10, 30));
  EXPECT_EQ(corners[3], Vec3(10, 10, 30));
  for (const auto& p : gen_landmark_plane(30, 20, 0.5, 1.5, 0.0)) EXPECT_EQ(p.z(), 30.0);
  EXPECT_THROW(gen_landmark_plane(30, 1, 2), InvalidArgument);
}

TEST(MarkerLayout, CoplanarWithCenterAtCentroid) {
  for (int agent = 0; agent < 2; ++agent) {
    const MarkerLayout m = make_rig(agent).markers;
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : m.points) centroid += p / 5.0;
    EXPECT_LT((centroid - m.center()).norm(), 1e-15);
    for (const auto& p : m.points) EXPECT_NEAR(p.y(), m.center().y(), 1e-9);
  }
}

TEST(Monodepth, InverseOfExponentialModel) {
  DepthImage z(2, 1);
  z.at(0, 0) = std::exp(1.0);
  z.at(1, 0) = std::exp(2.0);
  const DepthImage d = synth_monodepth(z, ExpFitParams{1.0, 1.0, 0.0, 0.0});
  EXPECT_NEAR(d.at(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.at(1, 0), 2.0, 1e-15);
}

TEST(Monodepth, InvalidWarp) {
  DepthImage z(1, 1, 1.0);
  EXPECT_THROW(synth_monodepth(z, ExpFitParams{-1.0, 1.0, 0.0, 0.0}), InvalidWarp);
  EXPECT_THROW(synth_monodepth(z, ExpFitParams{1.0, 0.0, 0.0, 0.0}), InvalidWarp);
  EXPECT_THROW(synth_monodepth(z, ExpFitParams{1.0, 1.0, 0.0, -2.0}), InvalidWarp);
}

TEST(Markers, NoiselessEqualsProjection) {
  const AgentRig r0 = make_rig(0), r1 = make_rig(1);
  const Pose leader{};
  const Pose follower{Rotation::about_z(0.1), Vec3(0.2, -3.0, 0.1)};
  Rng rng(1);
  const auto obs = observe_markers(leader * r0.body_from_side, follower, r1.markers, CameraIntrinsics{}, 0.0, rng);
  const Pose cam_from_target = (leader * r0.body_from_side).inverse() * follower;
  for (int i = 0; i < 5; ++i) {
    const PixelObs p = project(cam_from_target * r1.markers.points[static_cast<std::size_t>(i)], CameraIntrinsics{});
    EXPECT_TRUE(obs[static_cast<std::size_t>(i)].valid);
    EXPECT_EQ(obs[static_cast<std::size_t>(i)].u, p.u);
    EXPECT_EQ(obs[static_cast<std::size_t>(i)].v, p.v);
  }
}

TEST(Markers, NoiseStdCalibrated) {
  const AgentRig r0 = make_rig(0), r1 = make_rig(1);
  const Pose cam = r0.body_from_side;
  const Pose follower{Rotation::identity(), Vec3(0.0, -3.0, 0.0)};
  Rng clean(0), noisy(99);
  const auto ref = observe_markers(cam, follower, r1.markers, CameraIntrinsics{}, 0.0, clean);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto obs = observe_markers(cam, follower, r1.markers, CameraIntrinsics{}, 1.0, noisy);
    for (std::size_t i = 0; i < 5; ++i) {
      for (double e : {obs[i].u - ref[i].u, obs[i].v - ref[i].v}) {
        sum += e;
        sq += e * e;
        ++n;
      }
    }
  }
  ASSERT_EQ(n, 100000);
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_GE(sd, 0.98);
  EXPECT_LE(sd, 1.02);
}

TEST(Markers, OutsideFieldOfViewAllInvalid) {
  const AgentRig r0 = make_rig(0), r1 = make_rig(1);
  Rng rng(1);
  // Follower on the wrong side of the leader: behind the side camera.
  const Pose behind{Rotation::identity(), Vec3(0.0, 3.0, 0.0)};
  for (const auto& o : observe_markers(r0.body_from_side, behind, r1.markers, CameraIntrinsics{}, 0.0, rng)) {
    EXPECT_FALSE(o.valid);
  }
  // Far ahead: in front of the image plane but outside the frustum.
  const Pose ahead{Rotation::identity(), Vec3(30.0, -1.0, 0.0)};
  for (const auto& o : observe_markers(r0.body_from_side, ahead, r1.markers, CameraIntrinsics{}, 0.0, rng)) {
    EXPECT_FALSE(o.valid);
  }
}

TEST(Trajectory, AccelerationIsSecondDerivativeOfPosition) {
  const ScenarioConfig c;
  const double h = 1e-3;
  for (int agent = 0; agent < 2; ++agent) {
    for (double t : {0.0, 1.3, 4.7, 9.9}) {
      const Vec3 fd = (true_body_pose(c, agent, t + h).translation - 2.0 * true_body_pose(c, agent, t).translation +
                       true_body_pose(c, agent, t - h).translation) /
                      (h * h);
      EXPECT_LT((fd - true_world_accel(c, agent, t)).norm(), 1e-5);
    }
  }
}

TEST(Trajectory, StartsAtBaselineSeparation) {
  const ScenarioConfig c;
  const Vec3 d = true_body_pose(c, 1, 0.0).translation - true_body_pose(c, 0, 0.0).translation;
  EXPECT_NEAR(d.z(), 0.0, 1e-15);
  EXPECT_NEAR(d.y(), -c.baseline_m + c.wobble_lateral_m * std::sin(0.7), 1e-15);
}

TEST(SceneGeometry, RaycastHitsWallGroundAndBackdrop) {
  const ScenarioConfig c;
  const SceneGeometry s = SceneGeometry::from_config(c);
  EXPECT_NEAR(s.raycast(Vec3::Zero(), Vec3::UnitX()), 30.0, 1e-12);
  EXPECT_NEAR(s.raycast(Vec3::Zero(), -Vec3::UnitZ()), 2.0, 1e-12);
  // Passing beside the wall reaches the backdrop.
  EXPECT_NEAR(s.raycast(Vec3(0, 20, 0), Vec3::UnitX()), 65.0, 1e-12);
  EXPECT_TRUE(std::isinf(s.raycast(Vec3::Zero(), Vec3::UnitZ())));
  EXPECT_TRUE(s.visible(Vec3::Zero(), Vec3(30.0, 0.0, 0.0)));
  EXPECT_FALSE(s.visible(Vec3::Zero(), Vec3(65.0, 0.0, 0.0)));
}

TEST(SceneGeometry, RenderedDepthIsCameraZ) {
  const ScenarioConfig c;
  const SceneGeometry s = SceneGeometry::from_config(c);
  const Pose cam = make_rig(0).body_from_front;
  const CameraIntrinsics K;
  const DepthImage img = render_depth(s, cam, K);
  EXPECT_NEAR(img.at(320, 240), 30.0, 1e-9);
  // Any wall pixel: z-depth equals the wall distance regardless of the ray angle.
  EXPECT_NEAR(img.at(300, 200), 30.0, 1e-9);
  // A ground pixel near the bottom of the image unprojects onto the ground plane.
  const double z = img.at(320, 479);
  const Vec3 world = cam * unproject(320, 479, z, K);
  EXPECT_NEAR(world.z(), s.ground_z, 1e-9);
}

TEST(Stream, SeedReproducibility) {
  ScenarioConfig c;
  c.plane_spacing_m = 2.0;
  const SensorStream a = gen_parallel_flight(c);
  const SensorStream b = gen_parallel_flight(c);
  for (int agent = 0; agent < 2; ++agent) {
    const auto& x = a.agents[static_cast<std::size_t>(agent)];
    const auto& y = b.agents[static_cast<std::size_t>(agent)];
    ASSERT_EQ(x.side.size(), y.side.size());
    for (std::size_t i = 0; i < x.side.size(); ++i) {
      EXPECT_EQ(x.side[i].time, y.side[i].time);
      for (std::size_t m = 0; m < 5; ++m) {
        EXPECT_EQ(x.side[i].markers[m].u, y.side[i].markers[m].u);
        EXPECT_EQ(x.side[i].markers[m].v, y.side[i].markers[m].v);
      }
    }
    ASSERT_EQ(x.imu.size(), y.imu.size());
    for (std::size_t i = 0; i < x.imu.size(); ++i) EXPECT_EQ(x.imu[i].accel, y.imu[i].accel);
    ASSERT_EQ(x.front.size(), y.front.size());
    for (std::size_t i = 0; i < x.front.size(); ++i) {
      ASSERT_EQ(x.front[i].features.size(), y.front[i].features.size());
      for (std::size_t j = 0; j < x.front[i].features.size(); ++j) {
        EXPECT_EQ(x.front[i].features[j].u, y.front[i].features[j].u);
      }
    }
  }
  for (std::size_t i = 0; i < a.uwb.size(); ++i) EXPECT_EQ(a.uwb[i].range, b.uwb[i].range);

  c.rng_seed = 43;
  const SensorStream other = gen_parallel_flight(c);
  EXPECT_NE(other.uwb[5].range, a.uwb[5].range);
}

TEST(Stream, ChannelsAreTimeOrderedWithTruth) {
  ScenarioConfig c;
  c.plane_spacing_m = 2.0;
  const SensorStream s = gen_parallel_flight(c);
  for (const auto& a : s.agents) {
    for (std::size_t i = 1; i < a.side.size(); ++i) EXPECT_GT(a.side[i].time, a.side[i - 1].time);
    for (std::size_t i = 1; i < a.imu.size(); ++i) EXPECT_GT(a.imu[i].time, a.imu[i - 1].time);
    for (std::size_t i = 1; i < a.front.size(); ++i) EXPECT_GT(a.front[i].time, a.front[i - 1].time);
    EXPECT_LE(a.imu.front().time, 0.0);
    EXPECT_GE(a.imu.back().time, c.duration() + 0.1);
  }
  for (std::size_t i = 1; i < s.uwb.size(); ++i) EXPECT_GT(s.uwb[i].time, s.uwb[i - 1].time);
  EXPECT_EQ(s.uwb.size(), s.agents[0].side.size());
  EXPECT_EQ(s.leader_odometry.size(), s.agents[0].side.size());
}

TEST(Stream, NoiselessChannelsMatchGroundTruth) {
  const ScenarioConfig c = noiseless();
  const SensorStream s = gen_parallel_flight(c);
  const AgentRig r0 = make_rig(0), r1 = make_rig(1);
  Rng unused(0);
  for (std::size_t i = 0; i < s.agents[0].side.size(); i += 17) {
    const SideFrame& f = s.agents[0].side[i];
    const Pose follower = true_body_pose(c, 1, f.time);
    EXPECT_NEAR(s.uwb[i].range, (follower.translation - f.truth.translation).norm(), 1e-12);
    const auto ref = observe_markers(f.truth * r0.body_from_side, follower, r1.markers, c.intrinsics_side, 0.0,
                                     unused, f.time);
    for (std::size_t m = 0; m < 5; ++m) {
      EXPECT_TRUE(f.markers[m].valid);
      EXPECT_EQ(f.markers[m].u, ref[m].u);
      EXPECT_EQ(f.markers[m].v, ref[m].v);
    }
  }
  // Body-frame IMU equals the rotated truth acceleration.
  const auto& imu1 = s.agents[1].imu;
  for (std::size_t i = 0; i < imu1.size(); i += 101) {
    const Pose p = true_body_pose(c, 1, imu1[i].time);
    EXPECT_LT((p.rotation * imu1[i].accel - true_world_accel(c, 1, imu1[i].time)).norm(), 1e-12);
  }
  // Front features project the landmarks they name.
  const FrontFrame& f = s.agents[1].front[40];
  const Pose cam_from_world = (f.truth * r1.body_from_front).inverse();
  ASSERT_FALSE(f.features.empty());
  for (const PixelObs& px : f.features) {
    const PixelObs p = project(cam_from_world * s.landmarks[static_cast<std::size_t>(px.feature_id)], c.intrinsics_front);
    EXPECT_NEAR(px.u, p.u, 1e-9);
    EXPECT_NEAR(px.v, p.v, 1e-9);
  }
}

TEST(Stream, FollowerExposureLagsLeader) {
  ScenarioConfig c;
  c.plane_spacing_m = 2.0;
  c.exposure_jitter_s = 0.0;
  const SensorStream s = gen_parallel_flight(c);
  for (std::size_t i = 0; i < s.agents[0].side.size(); ++i) {
    EXPECT_NEAR(s.agents[1].side[i].time - s.agents[0].side[i].time, c.exposure_offset_s, 1e-12);
  }
}

TEST(Stream, VioPointsAreNearFieldGround) {
  ScenarioConfig c = noiseless();
  const SensorStream s = gen_parallel_flight(c);
  ASSERT_EQ(s.vio_points.size(), c.keyframe_count());
  const Pose cam = make_rig(0).body_from_front;
  for (std::size_t k = 0; k < s.vio_points.size(); k += 10) {
    const Pose world_from_cam = s.agents[0].front[k].truth * cam;
    EXPECT_EQ(static_cast<int>(s.vio_points[k].size()), c.vio_points_per_keyframe);
    for (const Vec3& p : s.vio_points[k]) {
      EXPECT_NEAR(p.z(), s.scene.ground_z, 1e-9);
      const double depth = (world_from_cam.inverse() * p).z();
      EXPECT_GE(depth, 2.5 - 1e-9);
      EXPECT_LE(depth, 10.0 + 1e-9);
    }
  }
}

}  // namespace
}  // namespace fcs
