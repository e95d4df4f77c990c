#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfcal/liegroup.hpp"

namespace mfcal {

struct NearestNeighbor {
  std::int64_t index = -1;
  double squared_distance = 0.0;
};

// Squared Euclidean distance used by every nearest-neighbour path, so the tree
// and the exhaustive search compare bit-identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) { return (a - b).squaredNorm(); }

// Exhaustive search; ties resolve to the lowest index.
NearestNeighbor brute_force_nearest(std::span<const Vec3> points, const Vec3& query);

// Static 3-d tree over a point set. Queries return the exact nearest neighbour
// with the same tie-breaking as brute_force_nearest.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points, int leaf_size = 8);

  NearestNeighbor nearest(const Vec3& query) const;
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
    std::uint32_t left = 0, right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& query, NearestNeighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 8;
};

}  // namespace mfcal
