// Hierarchical agglomerative clustering of plane hypotheses. The merge cost
// of two clusters is the mean point-to-plane distance of their pooled support
// under the pooled least-squares plane; merging stops when the cheapest merge
// exceeds the threshold.

#pragma once

#include <queue>
#include <vector>

#include "recon/geometry.hpp"
#include "recon/plane_hypotheses.hpp"

namespace recon {

namespace detail {

struct HacCluster {
  PlaneHypothesis plane;
  std::vector<Vec3> points;
  Vec3 orientation_hint = Vec3::Zero();  // sum of member hypothesis normals
  std::vector<int> members;
  int version = 0;
  bool alive = true;
};

// Least-squares plane of the pooled points, oriented along the hint; returns
// false for degenerate unions that must not merge.
inline bool pooled_plane(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                         const Vec3& hint, PlaneHypothesis* plane, double* cost) {
  std::vector<Vec3> pooled;
  pooled.reserve(a.size() + b.size());
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  PlaneHypothesis fit;
  try {
    fit = fit_plane_ls(pooled);
  } catch (const DegenerateInput&) {
    return false;
  }
  if (fit.normal.dot(hint) < 0) {
    fit.normal = -fit.normal;
    fit.offset = -fit.offset;
  }
  *plane = fit;
  *cost = mean_plane_distance(fit, pooled);
  return true;
}

}  // namespace detail

// support holds one point group per hypothesis. member_groups (optional)
// reports which input hypotheses each output plane absorbed.
inline std::vector<PlaneHypothesis> hac_cluster(
    const std::vector<PlaneHypothesis>& hypotheses,
    const std::vector<std::vector<Vec3>>& support, double merge_threshold,
    std::vector<std::vector<int>>* member_groups = nullptr) {
  const int n = int(hypotheses.size());
  std::vector<detail::HacCluster> clusters(n);
  for (int i = 0; i < n; ++i) {
    clusters[i].plane = hypotheses[i];
    clusters[i].points = support[i];
    clusters[i].orientation_hint = hypotheses[i].normal;
    clusters[i].members = {i};
  }

  struct Candidate {
    double cost;
    int a, b;
    int version_a, version_b;
    PlaneHypothesis merged;
    bool operator>(const Candidate& o) const {
      return std::tie(cost, a, b) > std::tie(o.cost, o.a, o.b);
    }
  };
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap;

  auto propose = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    PlaneHypothesis merged;
    double cost;
    if (!detail::pooled_plane(clusters[a].points, clusters[b].points,
                              clusters[a].orientation_hint + clusters[b].orientation_hint,
                              &merged, &cost)) {
      return;
    }
    if (cost <= merge_threshold) {
      heap.push({cost, a, b, clusters[a].version, clusters[b].version, merged});
    }
  };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) propose(a, b);
  }

  while (!heap.empty()) {
    const Candidate c = heap.top();
    heap.pop();
    if (!clusters[c.a].alive || !clusters[c.b].alive) continue;
    if (clusters[c.a].version != c.version_a || clusters[c.b].version != c.version_b) {
      continue;
    }
    auto& dst = clusters[c.a];
    auto& src = clusters[c.b];
    dst.plane = c.merged;
    dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
    // Keep pooled supports bounded so repeated merges stay cheap; the stride
    // subsample preserves the spatial spread of the union.
    if (dst.points.size() > 1600) {
      std::vector<Vec3> kept;
      kept.reserve(800);
      const double stride = double(dst.points.size()) / 800.0;
      for (int k = 0; k < 800; ++k) kept.push_back(dst.points[std::size_t(k * stride)]);
      dst.points = std::move(kept);
    }
    dst.orientation_hint += src.orientation_hint;
    dst.members.insert(dst.members.end(), src.members.begin(), src.members.end());
    dst.version++;
    src.alive = false;
    src.points.clear();
    for (int k = 0; k < n; ++k) {
      if (clusters[k].alive && k != c.a) propose(c.a, k);
    }
  }

  std::vector<PlaneHypothesis> out;
  if (member_groups) member_groups->clear();
  for (const auto& cluster : clusters) {
    if (!cluster.alive) continue;
    out.push_back(cluster.plane);
    if (member_groups) {
      auto members = cluster.members;
      std::sort(members.begin(), members.end());
      member_groups->push_back(std::move(members));
    }
  }
  return out;
}

}  // namespace recon
