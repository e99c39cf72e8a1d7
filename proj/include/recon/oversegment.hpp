// Oversegmentation by voxel-seeded region growing on position and normal.
// The voxel grid lives in a PCA-anchored frame of the fragment, which makes
// the segmentation equivariant under rigid motion of the input (up to
// tie-breaking); downstream only consumes segment centroids and adjacency.

#pragma once

#include <map>
#include <queue>
#include <set>
#include <tuple>
#include <vector>

#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/kdtree.hpp"

namespace recon {

struct Segment {
  std::vector<int> point_indices;
  Vec3 centroid = Vec3::Zero();
  std::vector<int> adjacency;
};

namespace detail {

// Data-anchored orthonormal frame: principal axes at the centroid, ordered by
// descending spread, signs fixed by the third moment.
inline std::pair<Mat3, Vec3> pca_frame(const std::vector<OrientedPoint>& points) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p.position;
  c /= double(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p.position - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes;
  for (int k = 0; k < 3; ++k) {
    Vec3 axis = eig.eigenvectors().col(2 - k);  // descending eigenvalue
    double m3 = 0;
    for (const auto& p : points) m3 += std::pow(axis.dot(p.position - c), 3);
    if (m3 < 0) {
      axis = -axis;
    } else if (m3 == 0) {
      int arg;
      axis.cwiseAbs().maxCoeff(&arg);
      if (axis[arg] < 0) axis = -axis;
    }
    axes.col(k) = axis;
  }
  if (axes.determinant() < 0) axes.col(2) = -axes.col(2);
  return {axes, c};
}

using VoxelKey = std::tuple<long, long, long>;

inline VoxelKey voxel_of(const Vec3& local, double resolution) {
  return {long(std::floor(local.x() / resolution)), long(std::floor(local.y() / resolution)),
          long(std::floor(local.z() / resolution))};
}

}  // namespace detail

// Every point ends up in exactly one segment; segment diameter stays below
// 3 * seed_resolution; adjacency connects segments sharing a voxel or a voxel
// face.
inline std::vector<Segment> oversegment(const Fragment& fragment, double seed_resolution) {
  const int n = int(fragment.points.size());
  std::vector<Segment> segments;
  if (n == 0) return segments;

  const auto [axes, origin] = detail::pca_frame(fragment.points);
  std::vector<Vec3> local(n);
  for (int i = 0; i < n; ++i) {
    local[i] = axes.transpose() * (fragment.points[i].position - origin);
  }

  // One seed per occupied voxel: the point closest to the voxel center.
  std::map<detail::VoxelKey, int> seed_of_voxel;
  std::vector<detail::VoxelKey> voxel_of_point(n);
  for (int i = 0; i < n; ++i) {
    const auto key = detail::voxel_of(local[i], seed_resolution);
    voxel_of_point[i] = key;
    const Vec3 center =
        (Vec3(double(std::get<0>(key)), double(std::get<1>(key)), double(std::get<2>(key))) +
         Vec3(0.5, 0.5, 0.5)) *
        seed_resolution;
    auto [it, inserted] = seed_of_voxel.emplace(key, i);
    if (!inserted && (local[i] - center).squaredNorm() <
                         (local[it->second] - center).squaredNorm()) {
      it->second = i;
    }
  }

  // Multi-source growth over the k-NN graph, gated by straight-line distance
  // to the seed and agreement with the seed normal.
  const double max_reach = 1.5 * seed_resolution;
  const double min_cos = std::cos(60.0 * M_PI / 180.0);
  SpatialIndex index(positions(fragment));
  constexpr int kNeighbors = 10;

  std::vector<int> assignment(n, -1);
  std::vector<int> seed_points;
  for (const auto& [key, idx] : seed_of_voxel) seed_points.push_back(idx);

  struct QueueItem {
    double dist;
    int seed_rank;
    int point;
    bool operator>(const QueueItem& o) const {
      return std::tie(dist, seed_rank, point) > std::tie(o.dist, o.seed_rank, o.point);
    }
  };
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<QueueItem>> queue;
  for (int r = 0; r < int(seed_points.size()); ++r) {
    queue.push({0.0, r, seed_points[r]});
  }
  while (!queue.empty()) {
    const QueueItem item = queue.top();
    queue.pop();
    if (assignment[item.point] >= 0) continue;
    assignment[item.point] = item.seed_rank;
    const Vec3 seed_pos = fragment.points[seed_points[item.seed_rank]].position;
    const Vec3 seed_nrm = fragment.points[seed_points[item.seed_rank]].normal;
    for (const Neighbor& nb : index.knn(fragment.points[item.point].position, kNeighbors)) {
      if (assignment[nb.index] >= 0) continue;
      if (nb.dist2 > seed_resolution * seed_resolution) continue;
      const double reach = (fragment.points[nb.index].position - seed_pos).norm();
      if (reach > max_reach) continue;
      if (fragment.points[nb.index].normal.dot(seed_nrm) < min_cos) continue;
      queue.push({reach, item.seed_rank, nb.index});
    }
  }

  // Group points; stragglers become singleton segments.
  std::map<int, int> segment_of_rank;
  auto segment_for = [&](int rank) {
    auto [it, inserted] = segment_of_rank.emplace(rank, int(segments.size()));
    if (inserted) segments.emplace_back();
    return it->second;
  };
  int next_singleton_rank = int(seed_points.size());
  for (int i = 0; i < n; ++i) {
    const int rank = assignment[i] >= 0 ? assignment[i] : next_singleton_rank++;
    segments[segment_for(rank)].point_indices.push_back(i);
  }
  for (auto& s : segments) {
    Vec3 c = Vec3::Zero();
    for (int i : s.point_indices) c += fragment.points[i].position;
    s.centroid = c / double(s.point_indices.size());
  }

  // Adjacency via shared or face-adjacent voxels.
  std::map<detail::VoxelKey, std::vector<int>> voxel_segments;
  for (int s = 0; s < int(segments.size()); ++s) {
    std::set<detail::VoxelKey> vox;
    for (int i : segments[s].point_indices) vox.insert(voxel_of_point[i]);
    for (const auto& key : vox) voxel_segments[key].push_back(s);
  }
  std::set<std::pair<int, int>> pairs;
  auto link = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (int s : a) {
      for (int t : b) {
        if (s != t) pairs.emplace(std::min(s, t), std::max(s, t));
      }
    }
  };
  for (const auto& [key, segs] : voxel_segments) {
    link(segs, segs);
    const auto [x, y, z] = key;
    for (const auto& nb : {detail::VoxelKey{x + 1, y, z}, detail::VoxelKey{x, y + 1, z},
                           detail::VoxelKey{x, y, z + 1}}) {
      auto it = voxel_segments.find(nb);
      if (it != voxel_segments.end()) link(segs, it->second);
    }
  }
  for (const auto& [s, t] : pairs) {
    segments[s].adjacency.push_back(t);
    segments[t].adjacency.push_back(s);
  }
  return segments;
}

}  // namespace recon
