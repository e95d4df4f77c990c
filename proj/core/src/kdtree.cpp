#include "mfcal/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace mfcal {

namespace {

inline bool better(double d2, std::int64_t idx, const NearestNeighbor& best) {
  return best.index < 0 || d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index);
}

}  // namespace

NearestNeighbor brute_force_nearest(std::span<const Vec3> points, const Vec3& query) {
  NearestNeighbor best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = squared_distance(query, points[i]);
    if (better(d2, static_cast<std::int64_t>(i), best)) best = {static_cast<std::int64_t>(i), d2};
  }
  return best;
}

KdTree::KdTree(std::vector<Vec3> points, int leaf_size) : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= static_cast<std::uint32_t>(leaf_size_)) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(std::uint32_t node_id, const Vec3& query, NearestNeighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = squared_distance(query, points_[idx]);
      if (better(d2, idx, best)) best = {idx, d2};
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double diff = query[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search(near, query, best);
  // Visit on equality so equidistant lower indices are not missed.
  if (diff * diff <= best.squared_distance) search(far, query, best);
}

NearestNeighbor KdTree::nearest(const Vec3& query) const {
  NearestNeighbor best;
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

}  // namespace mfcal
