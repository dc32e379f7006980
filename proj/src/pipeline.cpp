#include "fcs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <utility>

#include <CLI11.hpp>

#include "fcs/analysis.hpp"
#include "fcs/dense_fit.hpp"
#include "fcs/errors.hpp"
#include "fcs/io.hpp"

namespace fcs {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Floors applied to measurement sigmas before they become residual weights.
constexpr double kPixelSigmaFloor = 0.1;
constexpr double kRangeSigmaFloor = 0.005;
constexpr double kAccelSigmaFloor = 0.002;

// Largest monocular-value spread between neighbouring pixels accepted as one surface.
constexpr double kEdgeSpread = 0.05;
constexpr int kEdgeRadius = 3;

std::string fmt(double v) { return format_double(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string band_label(const DepthBand& b) { return fmt(b.lo) + "_" + fmt(b.hi); }

const char* status_name(SolveStatus s) { return s == SolveStatus::kConverged ? "converged" : "diverged"; }

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n > 0 ? sum / n : kNaN;
}

// Bilinear lookup that refuses samples near an occlusion edge, where pixels
// within `radius` disagree by more than max_spread. Sparse points projected
// with a pixel of error must not pick up the surface behind them.
double sample_smooth(const DepthImage& img, double u, double v, double max_spread, int radius) {
  const double d = img.sample(u, v);
  if (!std::isfinite(d)) return d;
  const int uc = static_cast<int>(std::floor(u));
  const int vc = static_cast<int>(std::floor(v));
  double lo = d, hi = d;
  for (int y = std::max(vc - radius, 0); y <= std::min(vc + 1 + radius, img.height - 1); ++y) {
    for (int x = std::max(uc - radius, 0); x <= std::min(uc + 1 + radius, img.width - 1); ++x) {
      const double n = img.at(x, y);
      if (!std::isfinite(n)) return kNaN;
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
  }
  return hi - lo > max_spread ? kNaN : d;
}

Pose clamped(std::span<const StampedPose> track, double t) {
  if (track.empty()) throw MissingData("empty pose track");
  return interp_track(track, std::clamp(t, track.front().time, track.back().time));
}

// Root-mean-square difference over pixels valid in both images.
double dense_rms(const DepthImage& pred, const DepthImage& truth, int stride) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < truth.height; v += stride) {
    for (int u = 0; u < truth.width; u += stride) {
      const double a = pred.at(u, v);
      const double b = truth.at(u, v);
      if (std::isfinite(a) && std::isfinite(b)) {
        sum += (a - b) * (a - b);
        ++n;
      }
    }
  }
  return n > 0 ? std::sqrt(sum / static_cast<double>(n)) : kNaN;
}

ModelMetrics model_metrics(std::string name, double sample_rms, const DepthImage& pred,
                           const DepthImage& truth, const CameraIntrinsics& K, int stride) {
  ModelMetrics m;
  m.model = std::move(name);
  m.sample_rms = sample_rms;
  m.dense_rms = dense_rms(pred, truth, stride);
  const PointCloud p = depth_to_cloud(pred, K, stride);
  const PointCloud g = depth_to_cloud(truth, K, stride);
  m.ucd = p.empty() || g.empty() ? kNaN : ucd(p, g);
  m.bands = banded_ucd(pred, truth, K, stride);
  return m;
}

void write_summary(const Summary& summary, const fs::path& path, const std::string& hash) {
  CsvTable t({"metric", "value"});
  for (const auto& m : summary) t.row({m.name, fmt(m.value)});
  t.write(path, hash);
}

std::vector<std::string> baseline_header(const std::string& first, const std::vector<double>& baselines) {
  std::vector<std::string> h{first};
  for (double l : baselines) h.push_back("l_" + fmt(l));
  return h;
}

void write_matrix(const fs::path& path, const std::string& hash, const std::string& row_name,
                  const std::vector<double>& rows, const std::vector<double>& baselines,
                  const Eigen::MatrixXd& m) {
  CsvTable t(baseline_header(row_name, baselines));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cells{fmt(rows[i])};
    for (std::size_t j = 0; j < baselines.size(); ++j) {
      cells.push_back(fmt(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    t.row(std::move(cells));
  }
  t.write(path, hash);
}

void run_analysis(const RunConfig& cfg, const fs::path& out, const std::string& hash) {
  const AnalysisConfig& a = cfg.analysis;
  auto wanted = [&](const char* name) { return std::find(a.which.begin(), a.which.end(), name) != a.which.end(); };

  if (wanted("condition")) {
    const ConditionSweep sw = condition_sweep(a.condition);
    const SweepResult& s = sw.costereo;
    write_matrix(out / "condition_costereo.csv", hash, "forward_m", s.rows, s.baselines, s.mean);
    CsvTable single({"forward_m", "mean_cond", "rejected"});
    CsvTable lng({"forward_m", "baseline_m", "mean_cond", "rejected"});
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      single.row({fmt(s.rows[i]), fmt(sw.single_agent[i]), fmt(sw.single_rejected[i])});
      for (std::size_t j = 0; j < s.baselines.size(); ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        lng.row({fmt(s.rows[i]), fmt(s.baselines[j]), fmt(s.mean(ii, jj)), fmt(s.rejected(ii, jj))});
      }
    }
    single.write(out / "condition_single_agent.csv", hash);
    lng.write(out / "condition_long.csv", hash);
  }

  if (wanted("sensitivity")) {
    const SensitivityField f = sensitivity_gradient(a.sensitivity);
    CsvTable t({"row", "col", "x", "y", "z", "t_x", "t_y", "t_z", "r_x", "r_y", "r_z"});
    for (int r = 0; r < f.rows; ++r) {
      for (int c = 0; c < f.cols; ++c) {
        const Vec3& p = f.landmarks[static_cast<std::size_t>(r * f.cols + c)];
        const auto& g = f.at(r, c);
        t.row({fmt(r), fmt(c), fmt(p.x()), fmt(p.y()), fmt(p.z()), fmt(g[0]), fmt(g[1]), fmt(g[2]),
               fmt(g[3]), fmt(g[4]), fmt(g[5])});
      }
    }
    t.write(out / "sensitivity.csv", hash);
    const auto m = f.mean();
    CsvTable mt({"component", "mean_abs_gradient"});
    const char* names[] = {"t_x", "t_y", "t_z", "r_x", "r_y", "r_z"};
    for (int k = 0; k < 6; ++k) mt.row({names[k], fmt(m[static_cast<std::size_t>(k)])});
    mt.write(out / "sensitivity_mean.csv", hash);
  }

  if (wanted("baseline_search")) {
    const BaselineSearchResult r = optimal_baseline_search(a.baseline_search);
    const SweepResult& s = r.sweep;
    write_matrix(out / "baseline_search_mean.csv", hash, "depth_m", s.rows, s.baselines, s.mean);
    write_matrix(out / "baseline_search_stderr.csv", hash, "depth_m", s.rows, s.baselines, s.std_error);
    CsvTable lng({"depth_m", "baseline_m", "mean_error_m", "std_error_m", "trials"});
    CsvTable best({"depth_m", "best_baseline_m"});
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      for (std::size_t j = 0; j < s.baselines.size(); ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        lng.row({fmt(s.rows[i]), fmt(s.baselines[j]), fmt(s.mean(ii, jj)), fmt(s.std_error(ii, jj)),
                 fmt(s.trials)});
      }
      best.row({fmt(s.rows[i]), fmt(r.best_baseline[i])});
    }
    lng.write(out / "baseline_search_long.csv", hash);
    best.write(out / "best_baseline.csv", hash);
  }
}

void write_estimates(const EstimationOutcome& e, const fs::path& path, const std::string& hash) {
  CsvTable t({"time_s", "px", "py", "pz", "vx", "vy", "vz", "roll_deg", "pitch_deg", "yaw_deg", "cost",
              "iters", "status", "true_px", "true_py", "true_pz", "true_yaw_deg"});
  for (std::size_t i = 0; i < e.estimates.size(); ++i) {
    const RelEstimate& r = e.estimates[i];
    const Pose& g = e.truth[i];
    t.row({fmt(r.time), fmt(r.p.x()), fmt(r.p.y()), fmt(r.p.z()), fmt(r.v.x()), fmt(r.v.y()),
           fmt(r.v.z()), fmt(rad2deg(r.orientation.roll)), fmt(rad2deg(r.orientation.pitch)),
           fmt(rad2deg(r.orientation.yaw)), fmt(r.cost), fmt(r.iterations), status_name(r.status),
           fmt(g.translation.x()), fmt(g.translation.y()), fmt(g.translation.z()),
           fmt(rad2deg(g.rotation.euler().yaw))});
  }
  t.write(path, hash);
}

void write_mapping(const MappingOutcome& m, const fs::path& out, const std::string& hash) {
  CsvTable lm({"window", "id", "source", "x", "y", "z", "cond", "accepted", "refined", "views",
               "anchor_depth_m", "error_m"});
  std::vector<PlyPoint> ply;
  for (const auto& ml : m.landmarks) {
    const Landmark& l = ml.landmark;
    const int src = l.source == LandmarkSource::kCovisible ? 0 : 1;
    lm.row({fmt(ml.window), std::to_string(l.id), src == 0 ? "covisible" : "vio", fmt(l.position.x()),
            fmt(l.position.y()), fmt(l.position.z()), fmt(l.condition_number), fmt(l.accepted ? 1 : 0),
            fmt(l.refined ? 1 : 0), fmt(l.views.size()), fmt(ml.anchor_depth), fmt(ml.error)});
    if (l.accepted) ply.push_back({l.position, src, l.condition_number});
  }
  lm.write(out / "landmarks.csv", hash);
  write_ply(out / "landmarks.ply", ply, hash);

  CsvTable fit({"window", "model", "samples", "sample_rms_m", "dense_rms_m", "ucd_m"});
  CsvTable bands({"window", "model", "band_lo_m", "band_hi_m", "points", "ucd_m"});
  CsvTable params({"window", "first_keyframe", "keyframes", "samples", "fitted", "a", "b", "c", "offset",
                   "coverage_area_m2", "note"});
  for (const auto& w : m.windows) {
    params.row({fmt(w.window), fmt(w.first_keyframe), fmt(w.keyframes), fmt(w.samples), fmt(w.fitted ? 1 : 0),
                fmt(w.fitted ? w.exp_fit.a : kNaN), fmt(w.fitted ? w.exp_fit.b : kNaN),
                fmt(w.fitted ? w.exp_fit.c : kNaN), fmt(w.fitted ? w.exp_fit.offset : kNaN),
                fmt(w.coverage_area), w.fit_error});
    for (const auto& mm : w.models) {
      fit.row({fmt(w.window), mm.model, fmt(w.samples), fmt(mm.sample_rms), fmt(mm.dense_rms), fmt(mm.ucd)});
      for (const auto& b : mm.bands) {
        bands.row({fmt(w.window), mm.model, fmt(b.band.lo), fmt(b.band.hi), fmt(b.points), fmt(b.ucd)});
      }
    }
  }
  fit.write(out / "fit_comparison.csv", hash);
  bands.write(out / "band_metrics.csv", hash);
  params.write(out / "mapping_windows.csv", hash);
  if (!m.first_dense.data.empty()) {
    write_depth(out / "dense_depth.fcsd", m.first_dense, hash, "exponential-fit dense depth, window 0 anchor view");
    write_depth(out / "truth_depth.fcsd", m.first_truth, hash, "ground-truth depth, window 0 anchor view");
    write_depth(out / "mono_depth.fcsd", m.first_mono, hash, "monocular prediction, window 0 anchor view");
  }
}

}  // namespace

EstimatorOptions estimator_options(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  EstimatorOptions o;
  o.window_size = static_cast<std::size_t>(cfg.estimator.window_size);
  o.level_threshold = deg2rad(cfg.estimator.level_threshold_deg);
  o.use_uwb = cfg.estimator.use_uwb;
  o.use_imu = cfg.estimator.use_imu;
  o.pixel_sigma = std::max(s.pixel_noise_sigma, kPixelSigmaFloor);
  o.weights.range_sigma = std::max(s.uwb_noise_sigma, kRangeSigmaFloor);
  o.weights.accel_sigma = std::max(s.accel_noise_sigma, kAccelSigmaFloor);
  o.weights.imu_period = 1.0 / s.imu_rate_hz;
  o.solver.max_iterations = cfg.estimator.max_iterations;
  return o;
}

std::vector<StampedPose> estimated_rel_track(const std::vector<RelEstimate>& estimates) {
  std::vector<StampedPose> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    out.push_back({e.time, Pose{Rotation::from_euler(e.orientation), e.p}});
  }
  return out;
}

std::vector<StampedPose> truth_rel_track(const SensorStream& stream) {
  std::vector<StampedPose> out;
  for (const auto& f : stream.agents[0].side) {
    out.push_back({f.time, f.truth.inverse() * true_body_pose(stream.config, 1, f.time)});
  }
  return out;
}

EstimationOutcome run_estimation(const SensorStream& stream, const RunConfig& cfg) {
  EstimationOutcome out;
  out.estimates = estimate_stream(stream, estimator_options(cfg));
  if (std::none_of(out.estimates.begin(), out.estimates.end(), [](const RelEstimate& e) { return e.visual_only.has_value(); })) {
    throw Unobservable("no frame produced a marker-based relative position");
  }
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double vis_sum = 0.0;
  double yaw_sum = 0.0;
  int vis_n = 0;
  for (const auto& e : out.estimates) {
    const Pose truth = true_body_pose(stream.config, 0, e.time).inverse() *
                       true_body_pose(stream.config, 1, e.time);
    out.truth.push_back(truth);
    const double err = (e.p - truth.translation).norm();
    abs_sum += err;
    sq_sum += err * err;
    yaw_sum += std::abs(wrap_angle(e.orientation.yaw - truth.rotation.euler().yaw));
    if (e.visual_only) {
      vis_sum += (*e.visual_only - truth.translation).norm();
      ++vis_n;
    }
    if (e.status == SolveStatus::kDiverged) ++out.diverged;
  }
  const double n = static_cast<double>(std::max<std::size_t>(out.estimates.size(), 1));
  out.position_mae = abs_sum / n;
  out.position_rmse = std::sqrt(sq_sum / n);
  out.yaw_mae = yaw_sum / n;
  out.visual_only_mae = vis_n > 0 ? vis_sum / vis_n : kNaN;
  return out;
}

MappingOutcome run_mapping(const SensorStream& stream, const RunConfig& cfg,
                           const std::vector<StampedPose>& rel_track) {
  const ScenarioConfig& sc = stream.config;
  const MappingConfig& mc = cfg.mapping;
  const CameraIntrinsics& K = sc.intrinsics_front;
  const AgentRig rig0 = make_rig(0);
  const AgentRig rig1 = make_rig(1);
  const auto& front0 = stream.agents[0].front;
  const auto& front1 = stream.agents[1].front;
  const std::span<const StampedPose> odo(stream.leader_odometry);
  const std::uint64_t mono_root = derive_seed(sc.rng_seed, "monodepth");

  // Estimated camera poses in the world frame.
  auto leader_cam = [&](double t) { return clamped(odo, t) * rig0.body_from_front; };
  auto follower_cam = [&](double t) {
    return clamped(odo, t) * clamped(rel_track, t) * rig1.body_from_front;
  };

  MappingOutcome out;
  const int n_key = static_cast<int>(front0.size());
  const int per = mc.keyframes_per_window;
  for (int w = 0, k0 = 0; k0 < n_key; ++w, k0 += per) {
    const int k1 = std::min(n_key, k0 + per);
    WindowMapping wm;
    wm.window = w;
    wm.first_keyframe = k0;
    wm.keyframes = k1 - k0;

    const Pose anchor = leader_cam(front0[static_cast<std::size_t>(k0)].time);
    const Pose anchor_inv = anchor.inverse();
    const Pose true_anchor = front0[static_cast<std::size_t>(k0)].truth * rig0.body_from_front;

    // Gather every observation of each landmark id in the window.
    struct Track {
      std::vector<PixelObs> obs;
      std::vector<Pose> poses;  // anchor_from_cam
      std::vector<int> views;
      bool agent[2] = {false, false};
    };
    std::map<std::int64_t, Track> tracks;
    for (int k = k0; k < k1; ++k) {
      for (int agent = 0; agent < 2; ++agent) {
        const FrontFrame& f = (agent == 0 ? front0 : front1)[static_cast<std::size_t>(k)];
        const Pose cam = anchor_inv * (agent == 0 ? leader_cam(f.time) : follower_cam(f.time));
        for (const PixelObs& px : f.features) {
          Track& tr = tracks[px.feature_id];
          tr.obs.push_back(px);
          tr.poses.push_back(cam);
          tr.views.push_back(2 * k + agent);
          tr.agent[agent] = true;
        }
      }
    }

    std::vector<Vec3> anchor_points;  // accepted points, anchor camera frame
    for (const auto& [id, tr] : tracks) {
      if (!mc.use_covisible || !tr.agent[0] || !tr.agent[1]) continue;
      std::vector<ViewObs> views;
      for (std::size_t i = 0; i < tr.obs.size(); ++i) views.push_back(ViewObs::from_pixel(tr.obs[i], tr.poses[i], K));
      Landmark lm = solve_gated(stack_system(views), mc.cond_threshold);
      if (lm.accepted && mc.gn_iterations > 0) lm = refine_gn(lm, tr.obs, tr.poses, K, mc.gn_iterations);
      lm.id = id;
      lm.views = tr.views;
      lm.source = LandmarkSource::kCovisible;
      MappedLandmark ml;
      ml.window = w;
      ml.anchor_depth = lm.position.z();
      if (lm.accepted) anchor_points.push_back(lm.position);
      const Vec3 anchor_pos = lm.position;
      lm.position = anchor * anchor_pos;
      ml.error = lm.accepted ? (lm.position - stream.landmarks[static_cast<std::size_t>(id)]).norm() : kNaN;
      ml.landmark = std::move(lm);
      out.landmarks.push_back(std::move(ml));
    }
    if (mc.use_vio) {
      std::int64_t vio_id = 0;
      for (int k = k0; k < k1; ++k) {
        for (const Vec3& p : stream.vio_points[static_cast<std::size_t>(k)]) {
          MappedLandmark ml;
          ml.window = w;
          ml.landmark.id = vio_id++;
          ml.landmark.position = p;
          ml.landmark.accepted = true;
          ml.landmark.source = LandmarkSource::kSelfVio;
          ml.landmark.views = {2 * k};
          ml.error = kNaN;
          const Vec3 a = anchor_inv * p;
          ml.anchor_depth = a.z();
          anchor_points.push_back(a);
          out.landmarks.push_back(std::move(ml));
        }
      }
    }

    // Densify the anchor view.
    const DepthImage truth = render_depth(stream.scene, true_anchor, K);
    Rng mono_rng(derive_seed(mono_root, static_cast<std::uint64_t>(w)));
    const DepthImage mono = synth_monodepth(truth, sc.mono_warp, sc.mono_noise_sigma, &mono_rng);
    std::vector<DepthSample> samples;
    for (const Vec3& p : anchor_points) {
      if (p.z() <= kMinValidDepth) continue;
      const double u = K.fx * p.x() / p.z() + K.cx;
      const double v = K.fy * p.y() / p.z() + K.cy;
      if (!K.in_image(u, v)) continue;
      const double d = sample_smooth(mono, u, v, kEdgeSpread, kEdgeRadius);
      if (std::isfinite(d)) samples.push_back({p.z(), d, u, v});
    }
    wm.samples = samples.size();
    try {
      wm.exp_fit = fit_exponential(samples);
      const LinearFit lin = fit_linear(samples);
      const QuadraticFit quad = fit_quadratic(samples);
      const DepthImage dense = apply_fit(mono, wm.exp_fit);
      const int stride = mc.depth_stride;
      wm.models.push_back(model_metrics("exponential", wm.exp_fit.rms, dense, truth, K, stride));
      wm.models.push_back(model_metrics("linear", lin.rms, apply_model(mono, [&](double d) { return lin.eval(d); }),
                                        truth, K, stride));
      wm.models.push_back(model_metrics("quadratic", quad.rms,
                                        apply_model(mono, [&](double d) { return quad.eval(d); }), truth, K, stride));
      PointCloud body;
      for (const Vec3& p : depth_to_cloud(dense, K, stride)) body.push_back(rig0.body_from_front * p);
      wm.coverage_area = coverage_area(body);
      wm.fitted = true;
      if (w == 0) out.first_dense = dense;
    } catch (const InsufficientSamples& e) {
      wm.fit_error = e.what();
    } catch (const DegenerateConfiguration& e) {
      wm.fit_error = e.what();
    }
    if (w == 0) {
      out.first_truth = truth;
      out.first_mono = mono;
    }
    out.windows.push_back(std::move(wm));
  }

  const bool any = std::any_of(out.windows.begin(), out.windows.end(), [](const WindowMapping& w) { return w.fitted; });
  if (!any) throw IllConditioned("no mapping window produced a depth fit");
  return out;
}

Summary estimation_summary(const EstimationOutcome& est) {
  return {{"estimates", static_cast<double>(est.estimates.size())},
          {"diverged_frames", static_cast<double>(est.diverged)},
          {"position_mae_m", est.position_mae},
          {"position_rmse_m", est.position_rmse},
          {"visual_only_mae_m", est.visual_only_mae},
          {"yaw_mae_rad", est.yaw_mae}};
}

Summary mapping_summary(const MappingOutcome& map) {
  Summary s;
  std::size_t covis = 0, rejected = 0, vio = 0;
  std::array<std::size_t, kDepthBands.size()> band_count{};
  std::vector<double> errors;
  for (const auto& ml : map.landmarks) {
    const Landmark& l = ml.landmark;
    if (l.source == LandmarkSource::kSelfVio) {
      ++vio;
    } else if (l.accepted) {
      ++covis;
      errors.push_back(ml.error);
    } else {
      ++rejected;
    }
    if (l.accepted) {
      const int b = depth_band_index(ml.anchor_depth);
      if (b >= 0) ++band_count[static_cast<std::size_t>(b)];
    }
  }
  s.push_back({"mapping_windows", static_cast<double>(map.windows.size())});
  s.push_back({"landmarks_covisible", static_cast<double>(covis)});
  s.push_back({"landmarks_rejected", static_cast<double>(rejected)});
  s.push_back({"landmarks_vio", static_cast<double>(vio)});
  s.push_back({"triangulation_error_mean_m", mean_of(errors)});
  for (std::size_t b = 0; b < kDepthBands.size(); ++b) {
    s.push_back({"landmarks_band_" + band_label(kDepthBands[b]), static_cast<double>(band_count[b])});
  }

  std::map<std::string, std::vector<double>> sample_rms, dense, overall;
  std::map<std::string, std::vector<std::vector<double>>> band_ucd;
  std::vector<double> coverage;
  int fitted = 0;
  for (const auto& w : map.windows) {
    if (!w.fitted) continue;
    ++fitted;
    coverage.push_back(w.coverage_area);
    for (const auto& m : w.models) {
      sample_rms[m.model].push_back(m.sample_rms);
      dense[m.model].push_back(m.dense_rms);
      overall[m.model].push_back(m.ucd);
      auto& bu = band_ucd[m.model];
      bu.resize(kDepthBands.size());
      for (std::size_t b = 0; b < m.bands.size(); ++b) bu[b].push_back(m.bands[b].ucd);
    }
  }
  s.push_back({"fitted_windows", static_cast<double>(fitted)});
  s.push_back({"coverage_area_m2", mean_of(coverage)});
  for (const char* model : {"exponential", "linear", "quadratic"}) {
    const std::string m = model;
    s.push_back({"fit_rms_" + m + "_m", mean_of(sample_rms[m])});
    s.push_back({"dense_rms_" + m + "_m", mean_of(dense[m])});
    s.push_back({"ucd_" + m + "_m", mean_of(overall[m])});
  }
  const auto& bu = band_ucd["exponential"];
  for (std::size_t b = 0; b < kDepthBands.size(); ++b) {
    s.push_back({"ucd_band_" + band_label(kDepthBands[b]) + "_m", b < bu.size() ? mean_of(bu[b]) : kNaN});
  }
  return s;
}

void cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  const std::string hash = config_hash(cfg);
  fs::create_directories(out);
  {
    std::ofstream f(out / "resolved_config.json");
    if (!f) throw Error("cannot write " + (out / "resolved_config.json").string());
    f << nlohmann::json{{"config_hash", hash}, {"config", to_json(cfg)}}.dump(2) << '\n';
  }
  const SensorStream s = gen_parallel_flight(cfg.scenario);

  CsvTable markers({"agent", "time_s", "marker", "u", "v", "valid"});
  CsvTable attitude({"agent", "time_s", "roll_deg", "pitch_deg", "yaw_deg"});
  CsvTable truth({"agent", "time_s", "x", "y", "z", "roll_deg", "pitch_deg", "yaw_deg"});
  CsvTable imu({"agent", "time_s", "ax", "ay", "az"});
  CsvTable features({"agent", "keyframe", "time_s", "landmark_id", "u", "v"});
  for (int agent = 0; agent < 2; ++agent) {
    const AgentStream& a = s.agents[static_cast<std::size_t>(agent)];
    for (const auto& f : a.side) {
      for (int m = 0; m < 5; ++m) {
        const PixelObs& p = f.markers[static_cast<std::size_t>(m)];
        markers.row({fmt(agent), fmt(f.time), fmt(m), fmt(p.u), fmt(p.v), fmt(p.valid ? 1 : 0)});
      }
      attitude.row({fmt(agent), fmt(f.time), fmt(rad2deg(f.attitude.roll)), fmt(rad2deg(f.attitude.pitch)),
                    fmt(rad2deg(f.attitude.yaw))});
      const Euler e = f.truth.rotation.euler();
      truth.row({fmt(agent), fmt(f.time), fmt(f.truth.translation.x()), fmt(f.truth.translation.y()),
                 fmt(f.truth.translation.z()), fmt(rad2deg(e.roll)), fmt(rad2deg(e.pitch)), fmt(rad2deg(e.yaw))});
    }
    for (const auto& m : a.imu) imu.row({fmt(agent), fmt(m.time), fmt(m.accel.x()), fmt(m.accel.y()), fmt(m.accel.z())});
    for (const auto& f : a.front) {
      for (const auto& p : f.features) {
        features.row({fmt(agent), fmt(f.keyframe), fmt(f.time), std::to_string(p.feature_id), fmt(p.u), fmt(p.v)});
      }
    }
  }
  CsvTable uwb({"time_s", "range_m"});
  for (const auto& r : s.uwb) uwb.row({fmt(r.time), fmt(r.range)});
  CsvTable odo({"time_s", "x", "y", "z"});
  for (const auto& o : s.leader_odometry) {
    odo.row({fmt(o.time), fmt(o.pose.translation.x()), fmt(o.pose.translation.y()), fmt(o.pose.translation.z())});
  }
  CsvTable lms({"id", "x", "y", "z"});
  for (std::size_t i = 0; i < s.landmarks.size(); ++i) {
    const Vec3& p = s.landmarks[i];
    lms.row({fmt(i), fmt(p.x()), fmt(p.y()), fmt(p.z())});
  }
  CsvTable vio({"keyframe", "x", "y", "z"});
  for (std::size_t k = 0; k < s.vio_points.size(); ++k) {
    for (const Vec3& p : s.vio_points[k]) vio.row({fmt(k), fmt(p.x()), fmt(p.y()), fmt(p.z())});
  }
  markers.write(out / "markers.csv", hash);
  attitude.write(out / "attitude.csv", hash);
  truth.write(out / "truth_poses.csv", hash);
  imu.write(out / "imu.csv", hash);
  features.write(out / "features.csv", hash);
  uwb.write(out / "uwb.csv", hash);
  odo.write(out / "leader_odometry.csv", hash);
  lms.write(out / "landmarks_truth.csv", hash);
  vio.write(out / "vio_points.csv", hash);
}

void cmd_pipeline(const RunConfig& cfg, const fs::path& out, const std::string& stage) {
  if (std::find(kPipelineStages.begin(), kPipelineStages.end(), stage) == kPipelineStages.end()) {
    throw ConfigError("unknown stage '" + stage + "' (expected all, estimation, mapping or analysis)");
  }
  const std::string hash = config_hash(cfg);
  fs::create_directories(out);
  Summary summary;
  const fs::path summary_path = out / "summary.csv";
  write_summary(summary, summary_path, hash);

  const bool do_est = stage == "all" || stage == "estimation";
  const bool do_map = stage == "all" || stage == "mapping";
  const bool do_analysis = stage == "all" || stage == "analysis";

  if (do_est || do_map) {
    const SensorStream stream = gen_parallel_flight(cfg.scenario);
    std::vector<StampedPose> rel;
    if (do_est) {
      const EstimationOutcome est = run_estimation(stream, cfg);
      write_estimates(est, out / "estimates.csv", hash);
      for (auto& m : estimation_summary(est)) summary.push_back(std::move(m));
      write_summary(summary, summary_path, hash);
      rel = estimated_rel_track(est.estimates);
    } else {
      // Mapping on its own runs on the true relative poses.
      rel = truth_rel_track(stream);
    }
    if (do_map) {
      const MappingOutcome map = run_mapping(stream, cfg, rel);
      write_mapping(map, out, hash);
      for (auto& m : mapping_summary(map)) summary.push_back(std::move(m));
      write_summary(summary, summary_path, hash);
    }
  }
  if (do_analysis) run_analysis(cfg, out, hash);
}

void cmd_analyze(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  run_analysis(cfg, out, config_hash(cfg));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Two-agent co-stereo mapping simulator and pipeline", "fcs"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::string stage = "all";
  std::optional<std::uint64_t> seed;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "generate sensor streams and ground truth"},
      {"pipeline", "run estimation, mapping and the configured analyses"},
      {"analyze", "run the offline geometry analyses"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--stage", stage, "pipeline stage: all, estimation, mapping, analysis");
    sub->add_option("--seed-override", seed, "replace scenario.rng_seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = load_run_config(config_path, seed);
    if (cmd == "simulate") {
      cmd_simulate(cfg, out_dir);
    } else if (cmd == "pipeline") {
      cmd_pipeline(cfg, out_dir, stage);
    } else {
      cmd_analyze(cfg, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fcs
