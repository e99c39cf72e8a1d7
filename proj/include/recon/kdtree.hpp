// SpatialIndex: immutable kd-tree snapshot of a point set with k-NN and
// radius queries. Ties are broken by point index so results match a
// brute-force scan exactly.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "recon/geometry.hpp"

namespace recon {

struct Neighbor {
  int index = -1;
  double dist2 = std::numeric_limits<double>::infinity();
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      root_ = build(0, int(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  // Up to k nearest neighbors, sorted by (squared distance, index).
  std::vector<Neighbor> knn(const Vec3& query, int k) const {
    std::vector<Neighbor> heap;  // max-heap on neighbor_less
    if (k <= 0 || points_.empty()) return heap;
    heap.reserve(std::size_t(k) + 1);
    search_knn(root_, query, k, heap);
    std::sort_heap(heap.begin(), heap.end(), neighbor_less);
    return heap;
  }

  Neighbor nearest(const Vec3& query) const {
    auto r = knn(query, 1);
    return r.empty() ? Neighbor{} : r[0];
  }

  // All indices with distance <= radius, sorted by index.
  std::vector<int> radius(const Vec3& query, double r) const {
    std::vector<int> out;
    if (points_.empty() || r < 0) return out;
    search_radius(root_, query, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      // Keep leaves in index order; irrelevant for results, nice for debugging.
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(node);
      return int(nodes_.size()) - 1;
    }
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    const int self = int(nodes_.size());
    nodes_.push_back(node);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void consider(const Vec3& query, int index, int k, std::vector<Neighbor>& heap) const {
    Neighbor cand{index, (points_[index] - query).squaredNorm()};
    if (int(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), neighbor_less);
    } else if (neighbor_less(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), neighbor_less);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), neighbor_less);
    }
  }

  void search_knn(int node_id, const Vec3& query, int k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) consider(query, order_[i], k, heap);
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search_knn(near, query, k, heap);
    if (int(heap.size()) < k || delta * delta <= heap.front().dist2) {
      search_knn(far, query, k, heap);
    }
  }

  void search_radius(int node_id, const Vec3& query, double r2, std::vector<int>& out) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - query).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search_radius(near, query, r2, out);
    if (delta * delta <= r2) search_radius(far, query, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace recon
