// Evaluation metrics: one-directional reconstruction error (estimated point
// to nearest ground-truth point) and per-pose trajectory error, both reported
// as mean-style and median statistics.

#pragma once

#include <vector>

#include "recon/error.hpp"
#include "recon/geometry.hpp"
#include "recon/kdtree.hpp"

namespace recon {

struct ReconstructionError {
  double average = 0;
  double median = 0;
};

struct TrajectoryError {
  double rmse = 0;
  double median = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  return 0.5 * (v[n / 2 - 1] + upper);
}

}  // namespace detail

inline ReconstructionError reconstruction_error(const std::vector<Vec3>& estimated,
                                                const std::vector<Vec3>& ground_truth) {
  if (estimated.empty() || ground_truth.empty()) {
    throw EmptyCloud("reconstruction_error: empty input cloud");
  }
  SpatialIndex index(ground_truth);
  std::vector<double> dists;
  dists.reserve(estimated.size());
  double sum = 0;
  for (const auto& p : estimated) {
    const double d = std::sqrt(index.nearest(p).dist2);
    dists.push_back(d);
    sum += d;
  }
  return {sum / double(dists.size()), detail::median_of(std::move(dists))};
}

enum class TrajectoryAlignment {
  kAnchorFirst,  // compare poses relative to index 0
  kBestFit,      // rigid best-fit of the translation tracks
};

inline TrajectoryError trajectory_error(const std::vector<RigidTransform>& estimated,
                                        const std::vector<RigidTransform>& ground_truth,
                                        TrajectoryAlignment alignment =
                                            TrajectoryAlignment::kAnchorFirst) {
  if (estimated.size() != ground_truth.size()) {
    throw LengthMismatch("trajectory_error: " + std::to_string(estimated.size()) + " vs " +
                         std::to_string(ground_truth.size()) + " poses");
  }
  if (estimated.empty()) throw LengthMismatch("trajectory_error: empty trajectories");

  std::vector<Vec3> est, gt;
  if (alignment == TrajectoryAlignment::kAnchorFirst) {
    const RigidTransform e0 = estimated[0].inverse();
    const RigidTransform g0 = ground_truth[0].inverse();
    for (std::size_t i = 0; i < estimated.size(); ++i) {
      est.push_back((e0 * estimated[i]).translation);
      gt.push_back((g0 * ground_truth[i]).translation);
    }
  } else {
    Eigen::Matrix3Xd src(3, estimated.size()), dst(3, estimated.size());
    for (std::size_t i = 0; i < estimated.size(); ++i) {
      src.col(i) = estimated[i].translation;
      dst.col(i) = ground_truth[i].translation;
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, /*with_scaling=*/false);
    for (std::size_t i = 0; i < estimated.size(); ++i) {
      est.push_back(t.topLeftCorner<3, 3>() * estimated[i].translation +
                    t.topRightCorner<3, 1>());
      gt.push_back(ground_truth[i].translation);
    }
  }

  std::vector<double> errors;
  errors.reserve(est.size());
  double sq = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double e = (est[i] - gt[i]).norm();
    errors.push_back(e);
    sq += e * e;
  }
  return {std::sqrt(sq / double(errors.size())), detail::median_of(std::move(errors))};
}

}  // namespace recon
