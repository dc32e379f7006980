#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcs/geom.hpp"

namespace fcs {

/// Static 3-D kd-tree for exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  /// Index of the closest point and its squared distance. Tree must be non-empty.
  std::size_t nearest(const Vec3& query, double* squared_distance = nullptr) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace fcs
