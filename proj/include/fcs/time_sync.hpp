#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcs/geom.hpp"

namespace fcs {

/// Half a 30 Hz frame period.
inline constexpr double kDefaultMaxSkew = 0.0167;

struct TimestampPair {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double time_a = 0.0;
  double time_b = 0.0;
};

/// Pairs each a-timestamp with its nearest b-timestamp. Pairs further apart
/// than max_skew are dropped, and each b-timestamp is used at most once
/// (greedy in ascending |dt|). Both inputs must be sorted ascending. The
/// result is ordered by index_a.
std::vector<TimestampPair> pair_nearest_timestamp(std::span<const double> stream_a,
                                                  std::span<const double> stream_b,
                                                  double max_skew = kDefaultMaxSkew);

struct StampedPose {
  double time = 0.0;
  Pose pose;
};

/// Linear translation + slerp rotation between two bracketing poses.
/// Throws OutOfRange when t_query lies outside [before.time, after.time].
Pose interp_pose(const StampedPose& before, const StampedPose& after, double t_query);

/// Interpolates a time-ordered pose track at t_query (bracketing search).
Pose interp_track(std::span<const StampedPose> track, double t_query);

}  // namespace fcs
