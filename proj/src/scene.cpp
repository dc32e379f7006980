#include "fcs/scene.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHitEps = 1e-9;

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("scenario.") + field + " must be positive");
  }
}

void require_non_negative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("scenario.") + field + " must be non-negative");
  }
}

Mat3 body_from_cam_forward() { return cam_from_body_forward().transpose(); }

}  // namespace

void ScenarioConfig::validate() const {
  require_positive(baseline_m, "baseline_m");
  require_positive(forward_span_m, "forward_span_m");
  require_positive(keyframe_step_m, "keyframe_step_m");
  require_positive(forward_speed_mps, "forward_speed_mps");
  require_positive(plane_depth_m, "plane_depth_m");
  require_positive(plane_size_m, "plane_size_m");
  require_positive(plane_spacing_m, "plane_spacing_m");
  require_positive(frame_rate_hz, "frame_rate_hz");
  require_positive(imu_rate_hz, "imu_rate_hz");
  require_positive(flight_height_m, "flight_height_m");
  require_positive(backdrop_depth_m, "backdrop_depth_m");
  require_non_negative(pixel_noise_sigma, "pixel_noise_sigma");
  require_non_negative(feature_pixel_sigma, "feature_pixel_sigma");
  require_non_negative(uwb_noise_sigma, "uwb_noise_sigma");
  require_non_negative(accel_noise_sigma, "accel_noise_sigma");
  require_non_negative(attitude_noise_deg, "attitude_noise_deg");
  require_non_negative(exposure_offset_s, "exposure_offset_s");
  require_non_negative(exposure_jitter_s, "exposure_jitter_s");
  require_non_negative(odometry_drift_sigma, "odometry_drift_sigma");
  require_non_negative(vio_noise_sigma, "vio_noise_sigma");
  require_non_negative(mono_noise_sigma, "mono_noise_sigma");
  require_non_negative(wobble_forward_m, "wobble_forward_m");
  require_non_negative(wobble_lateral_m, "wobble_lateral_m");
  require_non_negative(wobble_vertical_m, "wobble_vertical_m");
  require_non_negative(wobble_freq_hz, "wobble_freq_hz");
  if (vio_points_per_keyframe < 0) {
    throw ConfigError("scenario.vio_points_per_keyframe must be non-negative");
  }
  if (keyframe_step_m > forward_span_m) {
    throw ConfigError("scenario.keyframe_step_m must not exceed forward_span_m");
  }
  if (plane_spacing_m > plane_size_m) {
    throw ConfigError("scenario.plane_spacing_m must not exceed plane_size_m");
  }
  if (backdrop_depth_m <= plane_depth_m + forward_span_m) {
    throw ConfigError("scenario.backdrop_depth_m must lie beyond the wall");
  }
  if (plane_depth_m <= forward_span_m) {
    throw ConfigError("scenario.plane_depth_m must lie beyond the flight span");
  }
  if (!(mono_warp.a > 0.0) || mono_warp.b == 0.0) {
    throw ConfigError("scenario.mono_warp needs a > 0 and b != 0");
  }
  // Half a frame keeps leader/follower exposures pairable.
  if (exposure_offset_s + 4.0 * exposure_jitter_s >= 0.5 / frame_rate_hz) {
    throw ConfigError("scenario.exposure_offset_s must stay well under half a frame period");
  }
  try {
    intrinsics_front.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("scenario.intrinsics_front: ") + e.what());
  }
  try {
    intrinsics_side.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("scenario.intrinsics_side: ") + e.what());
  }
}

std::size_t ScenarioConfig::keyframe_count() const {
  return static_cast<std::size_t>(std::floor(forward_span_m / keyframe_step_m + 1e-9)) + 1;
}

MarkerLayout MarkerLayout::side_square(double y_face, double side) {
  const double h = 0.5 * side;
  MarkerLayout m;
  m.points = {Vec3(0.0, y_face, 0.0), Vec3(h, y_face, h), Vec3(-h, y_face, h),
              Vec3(-h, y_face, -h), Vec3(h, y_face, -h)};
  return m;
}

AgentRig make_rig(int agent) {
  if (agent != 0 && agent != 1) throw InvalidArgument("agent must be 0 or 1");
  AgentRig rig;
  rig.body_from_front = Pose{Rotation(body_from_cam_forward()), Vec3::Zero()};
  const double face = agent == 0 ? -0.1 : 0.1;
  Mat3 axes;  // columns: camera x, y, z in body coordinates
  if (agent == 0) {
    axes.col(0) = Vec3(-1.0, 0.0, 0.0);
    axes.col(1) = Vec3(0.0, 0.0, -1.0);
    axes.col(2) = Vec3(0.0, -1.0, 0.0);
  } else {
    axes.col(0) = Vec3(1.0, 0.0, 0.0);
    axes.col(1) = Vec3(0.0, 0.0, -1.0);
    axes.col(2) = Vec3(0.0, 1.0, 0.0);
  }
  rig.body_from_side = Pose{Rotation(axes), Vec3(0.0, face, 0.0)};
  rig.markers = MarkerLayout::side_square(face);
  return rig;
}

SceneGeometry SceneGeometry::from_config(const ScenarioConfig& cfg) {
  SceneGeometry s;
  s.ground_z = -cfg.flight_height_m;
  s.wall_x = cfg.plane_depth_m;
  s.wall_y_center = -0.5 * cfg.baseline_m;
  s.wall_half_width = 0.5 * cfg.plane_size_m;
  s.wall_top_z = s.ground_z + cfg.plane_size_m;
  s.backdrop_x = cfg.backdrop_depth_m;
  return s;
}

double SceneGeometry::raycast(const Vec3& o, const Vec3& dir) const {
  double best = kInf;
  if (dir.z() < 0.0) {
    const double t = (ground_z - o.z()) / dir.z();
    if (t > kHitEps) best = t;
  }
  if (dir.x() != 0.0) {
    const double t = (wall_x - o.x()) / dir.x();
    if (t > kHitEps && t < best) {
      const Vec3 hit = o + t * dir;
      const double tol = 1e-9 * (1.0 + std::abs(wall_x));
      if (std::abs(hit.y() - wall_y_center) <= wall_half_width + tol &&
          hit.z() >= ground_z - tol && hit.z() <= wall_top_z + tol) {
        best = t;
      }
    }
    const double tb = (backdrop_x - o.x()) / dir.x();
    if (tb > kHitEps && tb < best) best = tb;
  }
  return best;
}

bool SceneGeometry::visible(const Vec3& origin, const Vec3& point) const {
  return raycast(origin, point - origin) >= 1.0 - 1e-7;
}

DepthImage render_depth(const SceneGeometry& scene, const Pose& world_from_cam,
                        const CameraIntrinsics& K) {
  DepthImage img(K.width, K.height);
  const Mat3 R = world_from_cam.rotation.matrix();
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      // Ray with unit z in the camera frame, so the hit parameter is the depth.
      const Vec3 dir = R * pixel_ray(u, v, K);
      const double t = scene.raycast(world_from_cam.translation, dir);
      if (std::isfinite(t)) img.at(u, v) = t;
    }
  }
  return img;
}

std::vector<Vec3> gen_landmark_plane(double depth, double size, double spacing, double center_x,
                                     double center_y) {
  if (!(spacing > 0.0) || !(size >= spacing)) {
    throw InvalidArgument("landmark plane needs spacing > 0 and size >= spacing");
  }
  const int n = static_cast<int>(std::floor(size / spacing + 1e-9)) + 1;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  const double x0 = center_x - 0.5 * size;
  const double y0 = center_y - 0.5 * size;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      pts.emplace_back(x0 + ix * spacing, y0 + iy * spacing, depth);
    }
  }
  return pts;
}

DepthImage synth_monodepth(const DepthImage& true_depth, const ExpFitParams& warp,
                           double noise_sigma, Rng* rng) {
  if (!(warp.a > 0.0) || warp.b == 0.0) throw InvalidWarp("warp needs a > 0 and b != 0");
  DepthImage out(true_depth.width, true_depth.height);
  for (std::size_t i = 0; i < true_depth.data.size(); ++i) {
    const double z = true_depth.data[i];
    if (!std::isfinite(z)) continue;
    const double arg = z + warp.offset;
    if (!(arg > 0.0)) throw InvalidWarp("depth + offset must be positive");
    double d = warp.c + std::log(arg / warp.a) / warp.b;
    if (rng != nullptr) d += rng->gauss(noise_sigma);
    out.data[i] = d;
  }
  return out;
}

std::array<PixelObs, 5> observe_markers(const Pose& world_from_cam, const Pose& world_from_target,
                                        const MarkerLayout& layout, const CameraIntrinsics& K,
                                        double sigma, Rng& rng, double time) {
  const Pose cam_from_target = world_from_cam.inverse() * world_from_target;
  std::array<PixelObs, 5> out;
  for (std::size_t i = 0; i < layout.points.size(); ++i) {
    const Vec3 pc = cam_from_target * layout.points[i];
    PixelObs obs;
    obs.timestamp = time;
    obs.feature_id = static_cast<std::int64_t>(i);
    // Draw noise unconditionally so the stream does not depend on visibility.
    const double du = rng.gauss(sigma);
    const double dv = rng.gauss(sigma);
    if (pc.z() > 0.0) {
      const PixelObs p = project(pc, K);
      obs.u = p.u + du;
      obs.v = p.v + dv;
      obs.valid = K.in_image(p.u, p.v);
    } else {
      obs.valid = false;
    }
    out[i] = obs;
  }
  return out;
}

Pose true_body_pose(const ScenarioConfig& cfg, int agent, double t) {
  const double w = 2.0 * kPi * cfg.wobble_freq_hz;
  Pose p;
  if (agent == 0) {
    p.translation = Vec3(cfg.forward_speed_mps * t, 0.0,
                         0.5 * cfg.wobble_vertical_m * std::sin(0.8 * w * t));
    return p;
  }
  p.translation = Vec3(cfg.forward_speed_mps * t + cfg.wobble_forward_m * std::sin(w * t),
                       -cfg.baseline_m + cfg.wobble_lateral_m * std::sin(w * t + 0.7),
                       cfg.wobble_vertical_m * std::sin(1.3 * w * t + 0.3) -
                           cfg.wobble_vertical_m * std::sin(0.3));
  p.rotation = Rotation::about_z(deg2rad(cfg.follower_yaw_deg));
  return p;
}

Vec3 true_world_accel(const ScenarioConfig& cfg, int agent, double t) {
  const double w = 2.0 * kPi * cfg.wobble_freq_hz;
  if (agent == 0) {
    const double w0 = 0.8 * w;
    return Vec3(0.0, 0.0, -0.5 * cfg.wobble_vertical_m * w0 * w0 * std::sin(w0 * t));
  }
  const double wz = 1.3 * w;
  return Vec3(-cfg.wobble_forward_m * w * w * std::sin(w * t),
              -cfg.wobble_lateral_m * w * w * std::sin(w * t + 0.7),
              -cfg.wobble_vertical_m * wz * wz * std::sin(wz * t + 0.3));
}

namespace {

std::vector<Vec3> scene_landmarks(const ScenarioConfig& cfg, const SceneGeometry& scene) {
  std::vector<Vec3> out;
  // Wall grid, generated in the anchor camera frame and moved to the world.
  const Mat3 R = body_from_cam_forward();
  const auto wall = gen_landmark_plane(cfg.plane_depth_m, cfg.plane_size_m, cfg.plane_spacing_m,
                                       0.5 * cfg.baseline_m,
                                       cfg.flight_height_m - 0.5 * cfg.plane_size_m);
  for (const auto& p : wall) out.push_back(R * p);

  // Backdrop and far ground fill the depth range beyond the wall.
  for (double z = scene.ground_z + 2.0; z <= scene.ground_z + 30.0 + 1e-9; z += 4.0) {
    for (double y = -40.0; y <= 40.0 + 1e-9; y += 4.0) {
      out.emplace_back(scene.backdrop_x, y + scene.wall_y_center, z);
    }
  }
  for (double x = 12.0; x <= scene.backdrop_x - 4.0 + 1e-9; x += 3.0) {
    for (double y = -21.0; y <= 21.0 + 1e-9; y += 3.0) {
      out.emplace_back(x, y + scene.wall_y_center, scene.ground_z);
    }
  }
  return out;
}

std::vector<PixelObs> observe_features(const SensorStream& s, const Pose& world_from_cam,
                                       const CameraIntrinsics& K, double sigma, Rng& rng,
                                       double time) {
  std::vector<PixelObs> out;
  const Pose cam_from_world = world_from_cam.inverse();
  for (std::size_t j = 0; j < s.landmarks.size(); ++j) {
    const Vec3& L = s.landmarks[j];
    const Vec3 pc = cam_from_world * L;
    const double du = rng.gauss(sigma);
    const double dv = rng.gauss(sigma);
    if (pc.z() <= 0.5) continue;
    const PixelObs p = project(pc, K);
    if (!K.in_image(p.u, p.v)) continue;
    if (!s.scene.visible(world_from_cam.translation, L)) continue;
    PixelObs obs;
    obs.u = p.u + du;
    obs.v = p.v + dv;
    obs.timestamp = time;
    obs.feature_id = static_cast<std::int64_t>(j);
    out.push_back(obs);
  }
  return out;
}

}  // namespace

SensorStream gen_parallel_flight(const ScenarioConfig& cfg) {
  cfg.validate();
  SensorStream s;
  s.config = cfg;
  s.scene = SceneGeometry::from_config(cfg);
  s.landmarks = scene_landmarks(cfg, s.scene);

  const std::uint64_t root = cfg.rng_seed;
  const double T = cfg.duration();
  const std::array<AgentRig, 2> rigs{make_rig(0), make_rig(1)};
  const double att_sigma = deg2rad(cfg.attitude_noise_deg);

  Rng timing_rng(derive_seed(root, "timing"));
  Rng uwb_rng(derive_seed(root, "uwb"));
  Rng drift_rng(derive_seed(root, "odometry"));

  // Side-camera frames. The follower's exposures lag by a small offset.
  const int n_frames = static_cast<int>(std::floor(T * cfg.frame_rate_hz + 1e-9)) + 1;
  for (int agent = 0; agent < 2; ++agent) {
    Rng marker_rng(derive_seed(root, agent == 0 ? "markers0" : "markers1"));
    Rng att_rng(derive_seed(root, agent == 0 ? "attitude0" : "attitude1"));
    auto& side = s.agents[static_cast<std::size_t>(agent)].side;
    side.reserve(static_cast<std::size_t>(n_frames));
    const int other = 1 - agent;
    for (int n = 0; n < n_frames; ++n) {
      double t = n / cfg.frame_rate_hz;
      if (agent == 1) t = std::max(0.0, t + cfg.exposure_offset_s + timing_rng.gauss(cfg.exposure_jitter_s));
      SideFrame f;
      f.time = t;
      f.truth = true_body_pose(cfg, agent, t);
      const Pose world_from_cam = f.truth * rigs[static_cast<std::size_t>(agent)].body_from_side;
      f.markers = observe_markers(world_from_cam, true_body_pose(cfg, other, t),
                                  rigs[static_cast<std::size_t>(other)].markers,
                                  cfg.intrinsics_side, cfg.pixel_noise_sigma, marker_rng, t);
      const Euler e = f.truth.rotation.euler();
      f.attitude.roll = e.roll + att_rng.gauss(att_sigma);
      f.attitude.pitch = e.pitch + att_rng.gauss(att_sigma);
      f.attitude.yaw = e.yaw;
      side.push_back(f);
    }
  }

  // IMU covers a margin on both sides of the flight.
  for (int agent = 0; agent < 2; ++agent) {
    Rng imu_rng(derive_seed(root, agent == 0 ? "imu0" : "imu1"));
    auto& imu = s.agents[static_cast<std::size_t>(agent)].imu;
    const int k0 = static_cast<int>(std::floor(-0.1 * cfg.imu_rate_hz));
    const int k1 = static_cast<int>(std::ceil((T + 0.2) * cfg.imu_rate_hz));
    imu.reserve(static_cast<std::size_t>(k1 - k0 + 1));
    for (int k = k0; k <= k1; ++k) {
      const double t = k / cfg.imu_rate_hz;
      const Pose pose = true_body_pose(cfg, agent, t);
      ImuSample smp;
      smp.time = t;
      smp.accel = pose.rotation.inverse() * true_world_accel(cfg, agent, t);
      for (int a = 0; a < 3; ++a) smp.accel[a] += imu_rng.gauss(cfg.accel_noise_sigma);
      imu.push_back(smp);
    }
  }

  Vec3 drift = Vec3::Zero();
  double prev_t = 0.0;
  for (const auto& f : s.agents[0].side) {
    const Vec3 d = true_body_pose(cfg, 1, f.time).translation - f.truth.translation;
    s.uwb.push_back({f.time, d.norm() + uwb_rng.gauss(cfg.uwb_noise_sigma)});
    const double dt = f.time - prev_t;
    for (int a = 0; a < 3; ++a) drift[a] += drift_rng.gauss(cfg.odometry_drift_sigma * std::sqrt(dt));
    prev_t = f.time;
    Pose odo = f.truth;
    odo.translation += drift;
    s.leader_odometry.push_back({f.time, odo});
  }

  // Front-camera keyframes and the leader's near-field points.
  const std::size_t n_key = cfg.keyframe_count();
  s.vio_points.resize(n_key);
  Rng vio_rng(derive_seed(root, "vio"));
  for (int agent = 0; agent < 2; ++agent) {
    Rng feat_rng(derive_seed(root, agent == 0 ? "features0" : "features1"));
    auto& front = s.agents[static_cast<std::size_t>(agent)].front;
    for (std::size_t k = 0; k < n_key; ++k) {
      double t = static_cast<double>(k) * cfg.keyframe_step_m / cfg.forward_speed_mps;
      if (agent == 1) t = std::max(0.0, t + cfg.exposure_offset_s + timing_rng.gauss(cfg.exposure_jitter_s));
      FrontFrame f;
      f.time = t;
      f.keyframe = static_cast<int>(k);
      f.truth = true_body_pose(cfg, agent, t);
      const Pose world_from_cam = f.truth * rigs[static_cast<std::size_t>(agent)].body_from_front;
      f.features = observe_features(s, world_from_cam, cfg.intrinsics_front,
                                    cfg.feature_pixel_sigma, feat_rng, t);
      front.push_back(std::move(f));

      if (agent == 0) {
        const CameraIntrinsics& K = cfg.intrinsics_front;
        const Mat3 R = world_from_cam.rotation.matrix();
        auto& pts = s.vio_points[k];
        for (int attempt = 0; attempt < 50 * cfg.vio_points_per_keyframe &&
                              static_cast<int>(pts.size()) < cfg.vio_points_per_keyframe;
             ++attempt) {
          const double u = vio_rng.uniform(0.0, K.width - 1.0);
          const double v = vio_rng.uniform(K.cy + 1.0, K.height - 1.0);
          const Vec3 dir = R * pixel_ray(u, v, K);
          const double depth = s.scene.raycast(world_from_cam.translation, dir);
          const Vec3 hit = world_from_cam.translation + depth * dir;
          if (depth < 2.5 || depth > 10.0 || std::abs(hit.z() - s.scene.ground_z) > 1e-9) continue;
          Vec3 noisy = hit;
          for (int a = 0; a < 3; ++a) noisy[a] += vio_rng.gauss(cfg.vio_noise_sigma);
          pts.push_back(noisy);
        }
      }
    }
  }
  return s;
}

}  // namespace fcs
