#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace volseg {

/// Static 3-d tree over physical points, exact nearest-neighbour queries.
class KdTree3 {
 public:
  using Point = std::array<double, 3>;

  explicit KdTree3(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points_.size());
    if (!points_.empty()) root_ = build(0, order_.size(), 0);
  }

  bool empty() const noexcept { return points_.empty(); }

  /// Squared Euclidean distance to the nearest stored point.
  double nearest_sq(const Point& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (root_ != kNone) search(root_, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    std::size_t point;
    std::size_t left = kNone;
    std::size_t right = kNone;
    int axis;
  };

  std::size_t build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return kNone;
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{order_[mid], kNone, kNone, axis});
    const std::size_t l = build(lo, mid, depth + 1);
    const std::size_t r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(std::size_t id, const Point& q, double& best) const {
    const Node& n = nodes_[id];
    const Point& p = points_[n.point];
    const double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
    best = std::min(best, dx * dx + dy * dy + dz * dz);
    const double diff = q[n.axis] - p[n.axis];
    const std::size_t near = diff < 0 ? n.left : n.right;
    const std::size_t far = diff < 0 ? n.right : n.left;
    if (near != kNone) search(near, q, best);
    if (far != kNone && diff * diff < best) search(far, q, best);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t root_ = kNone;
};

}  // namespace volseg
