// Pairwise point-to-plane ICP with nearest-neighbor matching, distance and
// normal-agreement gates, and a damped Gauss-Newton update. The residual for
// a correspondence (p, q, n_q) is (T(p) - q) . n_q with the update applied by
// left multiplication T <- exp(xi) * T.

#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/kdtree.hpp"

namespace recon {

struct Correspondence {
  int source_index = -1;
  int target_index = -1;
  Vec3 target_normal = Vec3::UnitZ();
};

struct IcpParams {
  double max_dist = 0.1;                        // meters
  double max_normal_angle = 30.0 * M_PI / 180;  // radians
  int max_iterations = 30;
  double convergence = 1e-6;  // twist norm below which we stop
  int subsample_max = 20000;  // voxel-downsample bound on source points
};

struct IcpStep {
  double residual_before = 0;  // sum of squared residuals over the step's matches
  double residual_after = 0;   // same matches, after the accepted update
  int correspondences = 0;
  double step_norm = 0;
};

struct IcpResult {
  RigidTransform transform;
  double rmse = 0;
  double overlap_ratio = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<IcpStep> trace;
};

// Point-to-plane residual and its Jacobian w.r.t. a left perturbation of T.
inline double point_plane_residual(const RigidTransform& t, const Vec3& p_source,
                                   const Vec3& q_target, const Vec3& n_target,
                                   Vec6* jacobian = nullptr) {
  const Vec3 x = t.apply(p_source);
  if (jacobian) {
    jacobian->head<3>() = x.cross(n_target);
    jacobian->tail<3>() = n_target;
  }
  return (x - q_target).dot(n_target);
}

// Keeps at most max_points source indices, one representative per voxel of an
// adaptively grown grid; deterministic in input order.
inline std::vector<int> voxel_downsample_indices(const std::vector<OrientedPoint>& points,
                                                 int max_points) {
  std::vector<int> all(points.size());
  for (int i = 0; i < int(points.size()); ++i) all[i] = i;
  if (int(points.size()) <= max_points || points.empty()) return all;

  Vec3 lo = points[0].position, hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  double voxel = std::max((hi - lo).norm() / 256.0, 1e-6);
  for (int round = 0; round < 64; ++round) {
    std::unordered_map<std::uint64_t, int> first;
    first.reserve(points.size());
    for (int i = 0; i < int(points.size()); ++i) {
      const Vec3 rel = (points[i].position - lo) / voxel;
      const std::uint64_t key = (std::uint64_t(std::int64_t(rel.x()) & 0x1fffff) << 42) |
                                (std::uint64_t(std::int64_t(rel.y()) & 0x1fffff) << 21) |
                                std::uint64_t(std::int64_t(rel.z()) & 0x1fffff);
      first.emplace(key, i);
    }
    if (int(first.size()) <= max_points) {
      std::vector<int> keep;
      keep.reserve(first.size());
      for (const auto& [_, idx] : first) keep.push_back(idx);
      std::sort(keep.begin(), keep.end());
      return keep;
    }
    voxel *= 1.3;
  }
  all.resize(max_points);
  return all;
}

// One correspondence per source point: nearest target point under T, if it
// passes the distance gate and the normals (source normal rotated by T)
// agree within max_normal_angle.
inline std::vector<Correspondence> find_correspondences(
    const Fragment& source, const Fragment& target, const RigidTransform& t,
    double max_dist, double max_normal_angle, const SpatialIndex& target_index,
    const std::vector<int>* source_subset = nullptr) {
  std::vector<Correspondence> out;
  const double max_d2 = max_dist * max_dist;
  const double min_cos = std::cos(max_normal_angle);
  const int count = source_subset ? int(source_subset->size()) : int(source.points.size());
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const int si = source_subset ? (*source_subset)[k] : k;
    const auto& sp = source.points[si];
    const Neighbor nn = target_index.nearest(t.apply(sp.position));
    if (nn.index < 0 || nn.dist2 > max_d2) continue;
    const auto& tp = target.points[nn.index];
    if ((t.rotation * sp.normal).dot(tp.normal) < min_cos) continue;
    out.push_back({si, nn.index, tp.normal});
  }
  return out;
}

inline std::vector<Correspondence> find_correspondences(const Fragment& source,
                                                        const Fragment& target,
                                                        const RigidTransform& t,
                                                        double max_dist,
                                                        double max_normal_angle) {
  SpatialIndex index(positions(target));
  return find_correspondences(source, target, t, max_dist, max_normal_angle, index);
}

// Fraction of source points whose nearest target neighbor under T lies within
// dist_thresh.
inline double overlap_ratio(const Fragment& source, const Fragment& target,
                            const RigidTransform& t, double dist_thresh,
                            const SpatialIndex& target_index) {
  if (source.points.empty()) return 0.0;
  const double d2 = dist_thresh * dist_thresh;
  std::size_t hits = 0;
  for (const auto& sp : source.points) {
    const Neighbor nn = target_index.nearest(t.apply(sp.position));
    if (nn.index >= 0 && nn.dist2 <= d2) ++hits;
  }
  return double(hits) / double(source.points.size());
}

inline double overlap_ratio(const Fragment& source, const Fragment& target,
                            const RigidTransform& t, double dist_thresh) {
  SpatialIndex index(positions(target));
  return overlap_ratio(source, target, t, dist_thresh, index);
}

inline IcpResult icp_point_to_plane(const Fragment& source, const Fragment& target,
                                    const RigidTransform& t0, const IcpParams& params) {
  SpatialIndex target_index(positions(target));
  const std::vector<int> subset = voxel_downsample_indices(source.points, params.subsample_max);

  IcpResult result;
  result.transform = t0;
  std::vector<Correspondence> corr;

  auto residual_sum = [&](const RigidTransform& t) {
    double s = 0;
    for (const auto& c : corr) {
      const double r = point_plane_residual(t, source.points[c.source_index].position,
                                            target.points[c.target_index].position,
                                            c.target_normal);
      s += r * r;
    }
    return s;
  };

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    corr = find_correspondences(source, target, result.transform, params.max_dist,
                                params.max_normal_angle, target_index, &subset);
    if (int(corr.size()) < 6) {
      throw InsufficientCorrespondences(
          "icp: " + std::to_string(corr.size()) + " correspondences at iteration " +
          std::to_string(iter));
    }

    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    double before = 0;
    for (const auto& c : corr) {
      Vec6 j;
      const double r = point_plane_residual(result.transform,
                                            source.points[c.source_index].position,
                                            target.points[c.target_index].position,
                                            c.target_normal, &j);
      h += j * j.transpose();
      g += j * r;
      before += r * r;
    }
    // Tiny Tikhonov term keeps sliding directions of under-constrained scenes
    // at zero instead of blowing up the solve.
    h.diagonal().array() += 1e-12 * (1.0 + h.trace());
    Vec6 step = h.ldlt().solve(-g);

    RigidTransform updated = se3_exp(step) * result.transform;
    double after = residual_sum(updated);
    int halvings = 0;
    while (after > before && halvings < 8) {
      step *= 0.5;
      updated = se3_exp(step) * result.transform;
      after = residual_sum(updated);
      ++halvings;
    }
    if (after > before) {  // no usable descent direction; stop at current pose
      result.converged = true;
      result.iterations = iter;
      break;
    }

    result.trace.push_back({before, after, int(corr.size()), step.norm()});
    result.transform = updated;
    result.iterations = iter + 1;
    if (step.norm() < params.convergence) {
      result.converged = true;
      break;
    }
  }

  corr = find_correspondences(source, target, result.transform, params.max_dist,
                              params.max_normal_angle, target_index, &subset);
  if (!corr.empty()) {
    result.rmse = std::sqrt(residual_sum(result.transform) / double(corr.size()));
  }
  result.overlap_ratio =
      overlap_ratio(source, target, result.transform, params.max_dist, target_index);
  return result;
}

}  // namespace recon
