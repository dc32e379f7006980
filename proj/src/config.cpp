#include "fcs/config.hpp"

#include <fstream>
#include <set>

#include "fcs/errors.hpp"
#include "fcs/io.hpp"

namespace fcs {

using nlohmann::json;

namespace {

// Reads the members of one JSON object, remembering which were consumed so
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const json& parent, const std::string& key, const std::string& prefix, bool required = false)
      : path_(prefix.empty() ? key : prefix + "." + key) {
    if (!parent.contains(key)) {
      if (required) throw ConfigError("missing required field " + path_);
      return;
    }
    obj_ = &parent.at(key);
    if (!obj_->is_object()) throw ConfigError(path_ + " must be an object");
  }

  const std::string& path() const { return path_; }
  bool present() const { return obj_ != nullptr; }
  const json& raw() const { return *obj_; }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_ && obj_->contains(key);
  }

  void number(const std::string& key, double& out, bool required = false) {
    if (!has(key)) return missing(key, required);
    const json& v = obj_->at(key);
    if (!v.is_number()) throw ConfigError(field(key) + " must be a number");
    out = v.get<double>();
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + " must be an integer");
    out = v.get<int>();
  }

  void u64(const std::string& key, std::uint64_t& out, bool required = false) {
    if (!has(key)) return missing(key, required);
    const json& v = obj_->at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(field(key) + " must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + " must be true or false");
    out = v.get<bool>();
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(field(key) + " must be a non-empty array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key) + " must contain only numbers");
      out.push_back(e.get<double>());
    }
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_array()) throw ConfigError(field(key) + " must be an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(field(key) + " must contain only strings");
      out.push_back(e.get<std::string>());
    }
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!used_.count(k)) throw ConfigError("unknown field " + field(k));
    }
  }

 private:
  std::string field(const std::string& key) const { return path_ + "." + key; }
  void missing(const std::string& key, bool required) const {
    if (required) throw ConfigError("missing required field " + field(key));
  }

  std::string path_;
  const json* obj_ = nullptr;
  std::set<std::string> used_;
};

void parse_intrinsics(Section& parent, const std::string& key, CameraIntrinsics& K) {
  parent.has(key);
  if (!parent.present() || !parent.raw().contains(key)) return;
  Section s(parent.raw(), key, parent.path());
  s.number("fx", K.fx);
  s.number("fy", K.fy);
  s.number("cx", K.cx);
  s.number("cy", K.cy);
  s.integer("width", K.width);
  s.integer("height", K.height);
  s.finish();
  try {
    K.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(s.path() + ": " + e.what());
  }
}

json intrinsics_json(const CameraIntrinsics& K) {
  return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  RunConfig cfg;
  {
    std::set<std::string> known{"scenario", "estimator", "mapping", "analysis"};
    for (const auto& [k, v] : doc.items()) {
      if (!known.count(k)) throw ConfigError("unknown field " + k);
    }
  }

  Section sc(doc, "scenario", "", true);
  ScenarioConfig& s = cfg.scenario;
  sc.u64("rng_seed", s.rng_seed, true);
  sc.number("baseline_m", s.baseline_m, true);
  sc.number("forward_span_m", s.forward_span_m);
  sc.number("keyframe_step_m", s.keyframe_step_m);
  sc.number("forward_speed_mps", s.forward_speed_mps);
  sc.number("plane_depth_m", s.plane_depth_m);
  sc.number("plane_size_m", s.plane_size_m);
  sc.number("plane_spacing_m", s.plane_spacing_m);
  sc.number("pixel_noise_sigma", s.pixel_noise_sigma);
  sc.number("feature_pixel_sigma", s.feature_pixel_sigma);
  sc.number("uwb_noise_sigma", s.uwb_noise_sigma);
  sc.number("accel_noise_sigma", s.accel_noise_sigma);
  sc.number("attitude_noise_deg", s.attitude_noise_deg);
  sc.number("frame_rate_hz", s.frame_rate_hz);
  sc.number("imu_rate_hz", s.imu_rate_hz);
  sc.number("follower_yaw_deg", s.follower_yaw_deg);
  sc.number("wobble_forward_m", s.wobble_forward_m);
  sc.number("wobble_lateral_m", s.wobble_lateral_m);
  sc.number("wobble_vertical_m", s.wobble_vertical_m);
  sc.number("wobble_freq_hz", s.wobble_freq_hz);
  sc.number("exposure_offset_s", s.exposure_offset_s);
  sc.number("exposure_jitter_s", s.exposure_jitter_s);
  sc.number("odometry_drift_sigma", s.odometry_drift_sigma);
  sc.number("flight_height_m", s.flight_height_m);
  sc.number("backdrop_depth_m", s.backdrop_depth_m);
  sc.integer("vio_points_per_keyframe", s.vio_points_per_keyframe);
  sc.number("vio_noise_sigma", s.vio_noise_sigma);
  sc.number("mono_noise_sigma", s.mono_noise_sigma);
  if (sc.has("mono_warp")) {
    Section w(sc.raw(), "mono_warp", sc.path());
    w.number("a", s.mono_warp.a);
    w.number("b", s.mono_warp.b);
    w.number("c", s.mono_warp.c);
    w.number("offset", s.mono_warp.offset);
    w.finish();
  }
  parse_intrinsics(sc, "intrinsics_front", s.intrinsics_front);
  parse_intrinsics(sc, "intrinsics_side", s.intrinsics_side);
  sc.finish();
  s.validate();

  Section es(doc, "estimator", "");
  EstimatorConfig& e = cfg.estimator;
  es.integer("window_size", e.window_size);
  es.number("level_threshold_deg", e.level_threshold_deg);
  es.integer("max_iterations", e.max_iterations);
  es.boolean("use_uwb", e.use_uwb);
  es.boolean("use_imu", e.use_imu);
  es.finish();
  if (e.window_size < 2) throw ConfigError("estimator.window_size must be at least 2");
  if (e.max_iterations < 1) throw ConfigError("estimator.max_iterations must be positive");
  if (e.level_threshold_deg < 0.0) throw ConfigError("estimator.level_threshold_deg must be non-negative");

  Section ms(doc, "mapping", "");
  MappingConfig& m = cfg.mapping;
  ms.integer("keyframes_per_window", m.keyframes_per_window);
  ms.number("cond_threshold", m.cond_threshold);
  ms.integer("gn_iterations", m.gn_iterations);
  ms.integer("depth_stride", m.depth_stride);
  ms.boolean("use_vio", m.use_vio);
  ms.boolean("use_covisible", m.use_covisible);
  ms.finish();
  if (m.keyframes_per_window < 1) throw ConfigError("mapping.keyframes_per_window must be positive");
  if (!(m.cond_threshold >= 1.0)) throw ConfigError("mapping.cond_threshold must be at least 1");
  if (m.gn_iterations < 0) throw ConfigError("mapping.gn_iterations must be non-negative");
  if (m.depth_stride < 1) throw ConfigError("mapping.depth_stride must be positive");
  if (!m.use_vio && !m.use_covisible) throw ConfigError("mapping needs use_vio or use_covisible");

  Section as(doc, "analysis", "");
  AnalysisConfig& a = cfg.analysis;
  as.strings("which", a.which);
  for (const auto& w : a.which) {
    if (w != "condition" && w != "sensitivity" && w != "baseline_search") {
      throw ConfigError("analysis.which has unknown entry '" + w + "'");
    }
  }
  if (as.has("condition")) {
    Section c(as.raw(), "condition", as.path());
    c.numbers("baselines", a.condition.baselines);
    c.numbers("forward_spans", a.condition.forward_spans);
    c.number("keyframe_step", a.condition.keyframe_step);
    c.number("depth", a.condition.depth);
    c.number("plane_size", a.condition.plane_size);
    c.number("plane_spacing", a.condition.plane_spacing);
    c.finish();
  }
  if (as.has("sensitivity")) {
    Section c(as.raw(), "sensitivity", as.path());
    c.number("baseline", a.sensitivity.baseline);
    c.number("depth", a.sensitivity.depth);
    c.number("plane_size", a.sensitivity.plane_size);
    c.number("plane_spacing", a.sensitivity.plane_spacing);
    c.number("step", a.sensitivity.step);
    c.finish();
  }
  if (as.has("baseline_search")) {
    Section c(as.raw(), "baseline_search", as.path());
    c.numbers("baselines", a.baseline_search.baselines);
    c.numbers("depths", a.baseline_search.depths);
    c.integer("trials", a.baseline_search.trials);
    c.number("focal", a.baseline_search.focal);
    c.number("pixel_sigma", a.baseline_search.pixel_sigma);
    c.number("plane_size", a.baseline_search.plane_size);
    c.number("plane_spacing", a.baseline_search.plane_spacing);
    c.number("front_pixel_sigma", a.baseline_search.front_pixel_sigma);
    c.finish();
    if (a.baseline_search.trials < 1) throw ConfigError("analysis.baseline_search.trials must be positive");
  }
  as.finish();
  a.baseline_search.seed = derive_seed(s.rng_seed, "baseline_search");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (seed_override && doc.is_object() && doc.contains("scenario") && doc["scenario"].is_object()) {
    doc["scenario"]["rng_seed"] = *seed_override;
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  json j;
  j["scenario"] = {
      {"rng_seed", s.rng_seed},
      {"baseline_m", s.baseline_m},
      {"forward_span_m", s.forward_span_m},
      {"keyframe_step_m", s.keyframe_step_m},
      {"forward_speed_mps", s.forward_speed_mps},
      {"plane_depth_m", s.plane_depth_m},
      {"plane_size_m", s.plane_size_m},
      {"plane_spacing_m", s.plane_spacing_m},
      {"pixel_noise_sigma", s.pixel_noise_sigma},
      {"feature_pixel_sigma", s.feature_pixel_sigma},
      {"uwb_noise_sigma", s.uwb_noise_sigma},
      {"accel_noise_sigma", s.accel_noise_sigma},
      {"attitude_noise_deg", s.attitude_noise_deg},
      {"frame_rate_hz", s.frame_rate_hz},
      {"imu_rate_hz", s.imu_rate_hz},
      {"follower_yaw_deg", s.follower_yaw_deg},
      {"wobble_forward_m", s.wobble_forward_m},
      {"wobble_lateral_m", s.wobble_lateral_m},
      {"wobble_vertical_m", s.wobble_vertical_m},
      {"wobble_freq_hz", s.wobble_freq_hz},
      {"exposure_offset_s", s.exposure_offset_s},
      {"exposure_jitter_s", s.exposure_jitter_s},
      {"odometry_drift_sigma", s.odometry_drift_sigma},
      {"flight_height_m", s.flight_height_m},
      {"backdrop_depth_m", s.backdrop_depth_m},
      {"vio_points_per_keyframe", s.vio_points_per_keyframe},
      {"vio_noise_sigma", s.vio_noise_sigma},
      {"mono_noise_sigma", s.mono_noise_sigma},
      {"mono_warp", {{"a", s.mono_warp.a}, {"b", s.mono_warp.b}, {"c", s.mono_warp.c}, {"offset", s.mono_warp.offset}}},
      {"intrinsics_front", intrinsics_json(s.intrinsics_front)},
      {"intrinsics_side", intrinsics_json(s.intrinsics_side)},
  };
  const EstimatorConfig& e = cfg.estimator;
  j["estimator"] = {{"window_size", e.window_size},
                    {"level_threshold_deg", e.level_threshold_deg},
                    {"max_iterations", e.max_iterations},
                    {"use_uwb", e.use_uwb},
                    {"use_imu", e.use_imu}};
  const MappingConfig& m = cfg.mapping;
  j["mapping"] = {{"keyframes_per_window", m.keyframes_per_window},
                  {"cond_threshold", m.cond_threshold},
                  {"gn_iterations", m.gn_iterations},
                  {"depth_stride", m.depth_stride},
                  {"use_vio", m.use_vio},
                  {"use_covisible", m.use_covisible}};
  const AnalysisConfig& a = cfg.analysis;
  j["analysis"] = {
      {"which", a.which},
      {"condition",
       {{"baselines", a.condition.baselines},
        {"forward_spans", a.condition.forward_spans},
        {"keyframe_step", a.condition.keyframe_step},
        {"depth", a.condition.depth},
        {"plane_size", a.condition.plane_size},
        {"plane_spacing", a.condition.plane_spacing}}},
      {"sensitivity",
       {{"baseline", a.sensitivity.baseline},
        {"depth", a.sensitivity.depth},
        {"plane_size", a.sensitivity.plane_size},
        {"plane_spacing", a.sensitivity.plane_spacing},
        {"step", a.sensitivity.step}}},
      {"baseline_search",
       {{"baselines", a.baseline_search.baselines},
        {"depths", a.baseline_search.depths},
        {"trials", a.baseline_search.trials},
        {"focal", a.baseline_search.focal},
        {"pixel_sigma", a.baseline_search.pixel_sigma},
        {"plane_size", a.baseline_search.plane_size},
        {"plane_spacing", a.baseline_search.plane_spacing},
        {"front_pixel_sigma", a.baseline_search.front_pixel_sigma}}},
  };
  return j;
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

}  // namespace fcs
