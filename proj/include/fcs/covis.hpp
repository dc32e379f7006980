#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fcs/geom.hpp"

namespace fcs {

/// Cross-agent matching runs on a slower cadence set by its latency.
struct GuidanceSchedule {
  double frame_rate_hz = 30.0;
  double guidance_latency_s = 0.074;

  /// Frames skipped while a guidance result is in flight: ceil(latency * rate) - 1.
  int skip() const;
  bool is_guidance_frame(int frame) const { return frame % (skip() + 1) == 0; }
};

enum class AssocMode { kGuidanceOnly, kGuidancePlusPrediction };

/// Rate at which cross-agent associations are refreshed, Hz.
double association_rate(const GuidanceSchedule& schedule, AssocMode mode);

struct FeatureTrack {
  std::int64_t id = -1;
  int agent = 0;
  std::int64_t key = -1;  // oracle identity of the underlying scene point
  int birth_frame = 0;
  std::vector<int> frames;
  std::vector<PixelObs> history;
  bool alive = true;

  bool observed_at(int frame) const;
};

struct CrossPair {
  std::int64_t track0 = -1;
  std::int64_t track1 = -1;
  int first_matched_frame = 0;
  bool alive = true;
};

/// A detection as handed to the matcher; key is the oracle identity.
struct Detection {
  std::int64_t key = -1;
  PixelObs obs;
};

/// Returns index pairs (into det0, det1) it believes correspond.
using MatchOracle = std::function<std::vector<std::pair<std::size_t, std::size_t>>(
    std::span<const Detection>, std::span<const Detection>)>;
/// Next-frame observation of a track, or nullopt when tracking is lost.
using FlowOracle = std::function<std::optional<PixelObs>(const FeatureTrack&, int frame)>;

/// Matcher that pairs detections with equal keys.
MatchOracle ground_truth_matcher();

/// Guidance/prediction bookkeeping: tracks keep their id while predicted
/// frame to frame, cross-agent pairs persist while both tracks live.
class AssociationLedger {
 public:
  explicit AssociationLedger(std::size_t capacity = 200) : capacity_(capacity) {}

  struct GuidanceResult {
    std::size_t added = 0;
    std::size_t rejected = 0;
  };

  /// Appends new cross pairs from the matcher. Proposals touching a scene
  /// point that already has a live track on either agent are rejected.
  GuidanceResult run_guidance(int frame, std::span<const Detection> det0,
                              std::span<const Detection> det1, const MatchOracle& matcher);

  /// Pairs two existing live tracks; false if either already has a live pair.
  bool propose_pair(std::int64_t track0, std::int64_t track1, int frame);

  /// Extends every live track by one frame; lost tracks die and take their pairs with them.
  void predict_tracks(int frame, const FlowOracle& flow);

  std::int64_t add_track(int agent, std::int64_t key, int frame, const PixelObs& obs);

  const std::vector<FeatureTrack>& tracks() const { return tracks_; }
  const std::vector<CrossPair>& pairs() const { return pairs_; }
  std::size_t live_pairs() const;
  std::size_t capacity() const { return capacity_; }

  /// Every live pair's tracks are observed at every frame from the match up to `frame`.
  bool inheritance_holds(int frame) const;

 private:
  std::size_t capacity_;
  std::vector<FeatureTrack> tracks_;
  std::vector<CrossPair> pairs_;
  std::map<std::int64_t, std::size_t> live_pair_of_track_;
  std::map<std::pair<int, std::int64_t>, std::int64_t> live_track_of_key_;
};

/// Of the tracks observed at start_frame, how many are still observed at
/// start_frame + k for k = 0..horizon.
std::vector<std::size_t> retention_stats(std::span<const FeatureTrack> tracks, int start_frame,
                                         int horizon);

struct AssocSimConfig {
  int frames = 500;
  GuidanceSchedule schedule;
  AssocMode mode = AssocMode::kGuidancePlusPrediction;
  double dropout = 0.02;
  int scene_points = 400;
  double detection_prob = 0.9;
  std::uint64_t seed = 7;
  std::size_t capacity = 200;
};

struct AssocSimResult {
  int frames = 0;
  int refreshed_frames = 0;  // frames on which the association set was updated
  double measured_rate_hz = 0.0;
  bool inheritance_held = true;
  std::size_t max_live_pairs = 0;
  std::size_t total_pairs = 0;
  std::vector<std::size_t> live_pairs_per_frame;
};

/// Synthetic run: drifting scene points seen by both agents, a ground-truth
/// matcher on the guidance cadence and a dropout flow oracle in between.
AssocSimResult simulate_association(const AssocSimConfig& cfg);

}  // namespace fcs
