#include "fcs/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fcs {

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, points_.size());
  }
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[index_[i]]);
    hi = hi.cwiseMax(points_[index_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                   index_.begin() + static_cast<std::ptrdiff_t>(mid),
                   index_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[index_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(int node_id, const Vec3& q, std::size_t& best, double& best_d2) const {
  const Node& n = nodes_[static_cast<std::size_t>(node_id)];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const double d2 = (points_[index_[i]] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = index_[i];
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (diff * diff < best_d2) search(far, q, best, best_d2);
}

std::size_t KdTree::nearest(const Vec3& query, double* squared_distance) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, query, best, best_d2);
  if (squared_distance) *squared_distance = best_d2;
  return best;
}

}  // namespace fcs
