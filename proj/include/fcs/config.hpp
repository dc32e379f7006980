#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcs/analysis.hpp"
#include "fcs/scene.hpp"
#include "fcs/triangulate.hpp"

namespace fcs {

struct EstimatorConfig {
  int window_size = 10;
  double level_threshold_deg = 2.0;
  int max_iterations = 50;
  bool use_uwb = true;
  bool use_imu = true;
};

struct MappingConfig {
  int keyframes_per_window = 10;
  double cond_threshold = kDefaultCondThreshold;
  int gn_iterations = 10;
  int depth_stride = 4;
  bool use_vio = true;
  bool use_covisible = true;
};

struct AnalysisConfig {
  std::vector<std::string> which{"condition", "sensitivity", "baseline_search"};
  ConditionSweepConfig condition;
  SensitivityConfig sensitivity;
  BaselineSearchConfig baseline_search;  // seed is derived from the scenario seed
};

struct RunConfig {
  ScenarioConfig scenario;
  EstimatorConfig estimator;
  MappingConfig mapping;
  AnalysisConfig analysis;
};

/// Builds a run configuration from a JSON document. Missing optional fields
/// keep their defaults; missing required fields, unknown fields and wrong
/// types raise ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

/// Fully resolved document, defaults included.
nlohmann::json to_json(const RunConfig& cfg);
/// Hex FNV-1a of the compact resolved document.
std::string config_hash(const RunConfig& cfg);

}  // namespace fcs
