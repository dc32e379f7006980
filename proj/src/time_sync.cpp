#include "fcs/time_sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fcs/errors.hpp"

namespace fcs {

std::vector<TimestampPair> pair_nearest_timestamp(std::span<const double> stream_a,
                                                  std::span<const double> stream_b,
                                                  double max_skew) {
  std::vector<TimestampPair> candidates;
  if (stream_a.empty() || stream_b.empty()) return candidates;

  candidates.reserve(stream_a.size());
  for (std::size_t i = 0; i < stream_a.size(); ++i) {
    const double t = stream_a[i];
    auto it = std::lower_bound(stream_b.begin(), stream_b.end(), t);
    std::size_t best = stream_b.size();
    double best_dt = std::numeric_limits<double>::infinity();
    // Ties go to the earlier b-timestamp.
    if (it != stream_b.begin()) {
      const auto j = static_cast<std::size_t>(std::prev(it) - stream_b.begin());
      best = j;
      best_dt = std::abs(t - stream_b[j]);
    }
    if (it != stream_b.end()) {
      const auto j = static_cast<std::size_t>(it - stream_b.begin());
      const double dt = std::abs(stream_b[j] - t);
      if (dt < best_dt) {
        best = j;
        best_dt = dt;
      }
    }
    if (best_dt <= max_skew) candidates.push_back({i, best, t, stream_b[best]});
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) {
    return std::abs(x.time_a - x.time_b) < std::abs(y.time_a - y.time_b);
  });
  std::vector<bool> used(stream_b.size(), false);
  std::vector<TimestampPair> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (used[c.index_b]) continue;
    used[c.index_b] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.index_a < y.index_a; });
  return out;
}

Pose interp_pose(const StampedPose& before, const StampedPose& after, double t_query) {
  if (t_query < before.time || t_query > after.time) {
    throw OutOfRange("interpolation query outside the bracketing poses");
  }
  const double span = after.time - before.time;
  if (span <= 0.0) return before.pose;
  const double s = (t_query - before.time) / span;
  Pose out;
  out.translation = (1.0 - s) * before.pose.translation + s * after.pose.translation;
  out.rotation = slerp(before.pose.rotation, after.pose.rotation, s);
  return out;
}

Pose interp_track(std::span<const StampedPose> track, double t_query) {
  if (track.empty()) throw OutOfRange("empty pose track");
  auto it = std::lower_bound(track.begin(), track.end(), t_query,
                             [](const StampedPose& p, double t) { return p.time < t; });
  if (it == track.end()) {
    throw OutOfRange("query after the last pose");
  }
  if (it->time == t_query) return it->pose;
  if (it == track.begin()) throw OutOfRange("query before the first pose");
  return interp_pose(*std::prev(it), *it, t_query);
}

}  // namespace fcs
