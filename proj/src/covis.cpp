#include "fcs/covis.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fcs/errors.hpp"
#include "fcs/rng.hpp"

namespace fcs {

int GuidanceSchedule::skip() const {
  if (!(frame_rate_hz > 0.0) || guidance_latency_s < 0.0) {
    throw InvalidArgument("schedule needs a positive frame rate and non-negative latency");
  }
  // The small slack keeps latencies of exactly k frame periods at k - 1 skips.
  const int frames = static_cast<int>(std::ceil(guidance_latency_s * frame_rate_hz - 1e-9));
  return std::max(frames - 1, 0);
}

double association_rate(const GuidanceSchedule& schedule, AssocMode mode) {
  if (mode == AssocMode::kGuidancePlusPrediction) return schedule.frame_rate_hz;
  return schedule.frame_rate_hz / static_cast<double>(schedule.skip() + 1);
}

bool FeatureTrack::observed_at(int frame) const {
  return std::binary_search(frames.begin(), frames.end(), frame);
}

MatchOracle ground_truth_matcher() {
  return [](std::span<const Detection> d0, std::span<const Detection> d1) {
    std::unordered_map<std::int64_t, std::size_t> by_key;
    for (std::size_t j = 0; j < d1.size(); ++j) by_key.emplace(d1[j].key, j);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < d0.size(); ++i) {
      auto it = by_key.find(d0[i].key);
      if (it != by_key.end()) out.emplace_back(i, it->second);
    }
    return out;
  };
}

std::int64_t AssociationLedger::add_track(int agent, std::int64_t key, int frame, const PixelObs& obs) {
  FeatureTrack t;
  t.id = static_cast<std::int64_t>(tracks_.size());
  t.agent = agent;
  t.key = key;
  t.birth_frame = frame;
  t.frames.push_back(frame);
  t.history.push_back(obs);
  tracks_.push_back(std::move(t));
  live_track_of_key_[{agent, key}] = tracks_.back().id;
  return tracks_.back().id;
}

std::size_t AssociationLedger::live_pairs() const { return live_pair_of_track_.size() / 2; }

bool AssociationLedger::propose_pair(std::int64_t track0, std::int64_t track1, int frame) {
  auto valid = [&](std::int64_t id, int agent) {
    return id >= 0 && static_cast<std::size_t>(id) < tracks_.size() &&
           tracks_[static_cast<std::size_t>(id)].alive &&
           tracks_[static_cast<std::size_t>(id)].agent == agent;
  };
  if (!valid(track0, 0) || !valid(track1, 1)) return false;
  if (live_pair_of_track_.count(track0) || live_pair_of_track_.count(track1)) return false;
  if (live_pairs() >= capacity_) return false;
  pairs_.push_back(CrossPair{track0, track1, frame, true});
  live_pair_of_track_[track0] = pairs_.size() - 1;
  live_pair_of_track_[track1] = pairs_.size() - 1;
  return true;
}

AssociationLedger::GuidanceResult AssociationLedger::run_guidance(int frame,
                                                                  std::span<const Detection> det0,
                                                                  std::span<const Detection> det1,
                                                                  const MatchOracle& matcher) {
  GuidanceResult res;
  if (det0.empty() || det1.empty()) return res;
  for (const auto& [i, j] : matcher(det0, det1)) {
    if (i >= det0.size() || j >= det1.size()) {
      ++res.rejected;
      continue;
    }
    const Detection& a = det0[i];
    const Detection& b = det1[j];
    auto existing = [&](int agent, std::int64_t key) -> std::optional<std::int64_t> {
      auto it = live_track_of_key_.find({agent, key});
      if (it == live_track_of_key_.end()) return std::nullopt;
      return it->second;
    };
    const auto e0 = existing(0, a.key);
    const auto e1 = existing(1, b.key);
    if ((e0 && live_pair_of_track_.count(*e0)) || (e1 && live_pair_of_track_.count(*e1)) ||
        live_pairs() >= capacity_) {
      ++res.rejected;
      continue;
    }
    // A live but unpaired track keeps its id; only missing ones are created.
    auto extend_or_add = [&](int agent, const std::optional<std::int64_t>& e, const Detection& d) {
      if (!e) return add_track(agent, d.key, frame, d.obs);
      FeatureTrack& t = tracks_[static_cast<std::size_t>(*e)];
      if (t.frames.back() != frame) {
        t.frames.push_back(frame);
        t.history.push_back(d.obs);
      }
      return *e;
    };
    const std::int64_t t0 = extend_or_add(0, e0, a);
    const std::int64_t t1 = extend_or_add(1, e1, b);
    if (propose_pair(t0, t1, frame)) {
      ++res.added;
    } else {
      ++res.rejected;
    }
  }
  return res;
}

void AssociationLedger::predict_tracks(int frame, const FlowOracle& flow) {
  for (auto& t : tracks_) {
    if (!t.alive) continue;
    if (!t.frames.empty() && t.frames.back() >= frame) continue;
    const auto obs = flow(t, frame);
    if (obs) {
      t.frames.push_back(frame);
      t.history.push_back(*obs);
      continue;
    }
    t.alive = false;
    live_track_of_key_.erase({t.agent, t.key});
    auto it = live_pair_of_track_.find(t.id);
    if (it != live_pair_of_track_.end()) {
      CrossPair& p = pairs_[it->second];
      p.alive = false;
      live_pair_of_track_.erase(p.track0);
      live_pair_of_track_.erase(p.track1);
    }
  }
}

bool AssociationLedger::inheritance_holds(int frame) const {
  for (const auto& p : pairs_) {
    if (!p.alive) continue;
    const auto& a = tracks_[static_cast<std::size_t>(p.track0)];
    const auto& b = tracks_[static_cast<std::size_t>(p.track1)];
    if (!a.alive || !b.alive) return false;
    for (int f = p.first_matched_frame; f <= frame; ++f) {
      if (!a.observed_at(f) || !b.observed_at(f)) return false;
    }
  }
  return true;
}

std::vector<std::size_t> retention_stats(std::span<const FeatureTrack> tracks, int start_frame,
                                         int horizon) {
  if (horizon < 1) throw InvalidArgument("retention horizon must be at least 1");
  std::vector<std::size_t> counts(static_cast<std::size_t>(horizon) + 1, 0);
  for (const auto& t : tracks) {
    if (!t.observed_at(start_frame)) continue;
    // Histories are contiguous, so survival to k means observed at every earlier frame.
    for (int k = 0; k <= horizon; ++k) {
      if (!t.observed_at(start_frame + k)) break;
      ++counts[static_cast<std::size_t>(k)];
    }
  }
  return counts;
}

namespace {

struct ScenePoint {
  int first = 0;
  int last = 0;  // inclusive
  Vec2 pos0;
  Vec2 vel;
  Vec2 disparity;
};

PixelObs point_obs(const ScenePoint& p, int agent, int frame, double fps) {
  const Vec2 x = p.pos0 + p.vel * frame + (agent == 1 ? p.disparity : Vec2::Zero());
  PixelObs o;
  o.u = x.x();
  o.v = x.y();
  o.timestamp = frame / fps;
  return o;
}

}  // namespace

AssocSimResult simulate_association(const AssocSimConfig& cfg) {
  Rng scene_rng(derive_seed(cfg.seed, "assoc-scene"));
  std::vector<ScenePoint> points(static_cast<std::size_t>(cfg.scene_points));
  for (auto& p : points) {
    p.first = static_cast<int>(scene_rng.uniform(-60.0, cfg.frames));
    p.last = p.first + 20 + static_cast<int>(scene_rng.uniform(0.0, 120.0));
    p.pos0 = Vec2(scene_rng.uniform(20.0, 620.0), scene_rng.uniform(20.0, 460.0));
    p.vel = Vec2(scene_rng.uniform(-0.5, 0.5), scene_rng.uniform(-0.5, 0.5));
    p.disparity = Vec2(scene_rng.uniform(-40.0, -5.0), 0.0);
  }
  const double fps = cfg.schedule.frame_rate_hz;
  const MatchOracle matcher = ground_truth_matcher();

  AssociationLedger ledger(cfg.capacity);
  AssocSimResult res;
  res.frames = cfg.frames;
  for (int f = 0; f < cfg.frames; ++f) {
    bool refreshed = false;
    if (cfg.mode == AssocMode::kGuidancePlusPrediction && f > 0) {
      Rng flow_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(f), 1000));
      ledger.predict_tracks(f, [&](const FeatureTrack& t, int frame) -> std::optional<PixelObs> {
        const ScenePoint& p = points[static_cast<std::size_t>(t.key)];
        const bool lost = flow_rng.bernoulli(cfg.dropout);
        if (lost || frame > p.last) return std::nullopt;
        return point_obs(p, t.agent, frame, fps);
      });
      refreshed = ledger.live_pairs() > 0;
    }
    if (cfg.mode == AssocMode::kGuidanceOnly) {
      // Without prediction nothing carries over from one frame to the next.
      ledger.predict_tracks(f, [](const FeatureTrack&, int) { return std::nullopt; });
    }
    if (cfg.schedule.is_guidance_frame(f)) {
      std::array<std::vector<Detection>, 2> det;
      for (int agent = 0; agent < 2; ++agent) {
        Rng det_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(agent)));
        for (std::size_t k = 0; k < points.size(); ++k) {
          const ScenePoint& p = points[k];
          const bool seen = det_rng.bernoulli(cfg.detection_prob);
          if (f < p.first || f > p.last || !seen) continue;
          det[static_cast<std::size_t>(agent)].push_back(
              Detection{static_cast<std::int64_t>(k), point_obs(p, agent, f, fps)});
        }
      }
      ledger.run_guidance(f, det[0], det[1], matcher);
      refreshed = true;
    }
    if (refreshed) ++res.refreshed_frames;
    res.inheritance_held = res.inheritance_held && ledger.inheritance_holds(f);
    res.max_live_pairs = std::max(res.max_live_pairs, ledger.live_pairs());
    res.live_pairs_per_frame.push_back(ledger.live_pairs());
  }
  res.total_pairs = ledger.pairs().size();
  res.measured_rate_hz = res.refreshed_frames * fps / static_cast<double>(cfg.frames);
  return res;
}

}  // namespace fcs
