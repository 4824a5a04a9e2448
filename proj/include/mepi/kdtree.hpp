#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

namespace mepi::detail {

/// Static kd-tree over N points in d dimensions stored row-major.
class KdTree {
 public:
  KdTree(std::span<const double> points, std::size_t dim) : pts_(points), dim_(dim) {
    const std::size_t n = points.size() / dim;
    idx_.resize(n);
    std::iota(idx_.begin(), idx_.end(), std::size_t{0});
    nodes_.reserve(2 * n / kLeaf + 2);
    if (n > 0) build(0, n, 0);
  }

  /// Euclidean distance from point i to its k-th nearest neighbour (excluding i).
  double kth_neighbor_distance(std::size_t i, std::size_t k) const {
    std::priority_queue<double> heap;  // k smallest squared distances
    const double* q = pts_.data() + i * dim_;
    search(0, q, i, k, heap);
    return std::sqrt(heap.top());
  }

 private:
  static constexpr std::size_t kLeaf = 16;

  struct Node {
    std::size_t begin, end;
    std::size_t left = 0, right = 0;  // 0 means leaf
    std::size_t axis = 0;
    double split = 0.0;
    std::vector<double> lo, hi;  // bounding box
  };

  double coord(std::size_t p, std::size_t a) const { return pts_[p * dim_ + a]; }

  std::size_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    Node node{begin, end};
    node.lo.assign(dim_, std::numeric_limits<double>::infinity());
    node.hi.assign(dim_, -std::numeric_limits<double>::infinity());
    for (std::size_t t = begin; t < end; ++t)
      for (std::size_t a = 0; a < dim_; ++a) {
        node.lo[a] = std::min(node.lo[a], coord(idx_[t], a));
        node.hi[a] = std::max(node.hi[a], coord(idx_[t], a));
      }
    if (end - begin > kLeaf) {
      std::size_t axis = 0;
      double widest = -1.0;
      for (std::size_t a = 0; a < dim_; ++a)
        if (node.hi[a] - node.lo[a] > widest) {
          widest = node.hi[a] - node.lo[a];
          axis = a;
        }
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(begin), idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                       idx_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t x, std::size_t y) { return coord(x, axis) < coord(y, axis); });
      node.axis = axis;
      node.split = coord(idx_[mid], axis);
      node.left = build(begin, mid, depth + 1);
      node.right = build(mid, end, depth + 1);
    }
    nodes_[id] = std::move(node);
    return id;
  }

  double box_distance2(const Node& node, const double* q) const {
    double d2 = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double d = 0.0;
      if (q[a] < node.lo[a])
        d = node.lo[a] - q[a];
      else if (q[a] > node.hi[a])
        d = q[a] - node.hi[a];
      d2 += d * d;
    }
    return d2;
  }

  void search(std::size_t id, const double* q, std::size_t self, std::size_t k,
              std::priority_queue<double>& heap) const {
    const Node& node = nodes_[id];
    if (heap.size() == k && box_distance2(node, q) >= heap.top()) return;
    if (node.left == 0) {
      for (std::size_t t = node.begin; t < node.end; ++t) {
        const std::size_t p = idx_[t];
        if (p == self) continue;
        double d2 = 0.0;
        for (std::size_t a = 0; a < dim_; ++a) {
          const double d = coord(p, a) - q[a];
          d2 += d * d;
        }
        if (heap.size() < k) {
          heap.push(d2);
        } else if (d2 < heap.top()) {
          heap.pop();
          heap.push(d2);
        }
      }
      return;
    }
    const bool go_left = q[node.axis] < node.split;
    search(go_left ? node.left : node.right, q, self, k, heap);
    search(go_left ? node.right : node.left, q, self, k, heap);
  }

  std::span<const double> pts_;
  std::size_t dim_;
  std::vector<std::size_t> idx_;
  std::vector<Node> nodes_;
};

}  // namespace mepi::detail
