// Core geometric types: rigid transforms on SE(3), oriented planes, and the
// exp/log/Jacobian machinery used by all Gauss-Newton solvers in the library.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "recon/error.hpp"

namespace recon {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct OrientedPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // unit length
};

inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// ---------------------------------------------------------------------------
// RigidTransform: p -> R p + t

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform Identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
  }

  Eigen::Matrix<double, 3, 4> matrix34() const {
    Eigen::Matrix<double, 3, 4> m;
    m.leftCols<3>() = rotation;
    m.col(3) = translation;
    return m;
  }

  bool is_valid(double tol = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).norm() < tol * 10 &&
           std::abs(rotation.determinant() - 1.0) < tol * 10 &&
           translation.allFinite();
  }
};

inline Vec3 apply_transform(const RigidTransform& t, const Vec3& p) { return t.apply(p); }

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

// ---------------------------------------------------------------------------
// SO(3) / SE(3) exponential map. Twists are ordered [omega; v].

namespace detail {
constexpr double kSmallAngle = 1e-8;
}

inline Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < detail::kSmallAngle) {
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const double s = std::sin(theta), c = std::cos(theta);
  return Mat3::Identity() + (s / theta) * w + ((1.0 - c) / (theta * theta)) * w * w;
}

// Left Jacobian of SO(3); also the V matrix coupling rotation and translation
// in the SE(3) exponential.
inline Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < detail::kSmallAngle) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * w + b * w * w;
}

inline Mat3 so3_left_jacobian_inv(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < 1e-4) {
    // series: I - W/2 + W^2 (1/12 + theta^2/720)
    return Mat3::Identity() - 0.5 * w + (1.0 / 12.0 + theta * theta / 720.0) * w * w;
  }
  const double half = 0.5 * theta;
  const double c = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

inline RigidTransform se3_exp(const Vec6& xi) {
  const Vec3 omega = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  RigidTransform out;
  out.rotation = so3_exp(omega);
  out.translation = so3_left_jacobian(omega) * v;
  return out;
}

inline Vec3 so3_log(const Mat3& r) {
  // Quaternion route: stable for all angles in [0, pi].
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  const double theta = 2.0 * std::atan2(vn, q.w());
  if (vn < 1e-12) {
    return 2.0 * q.vec();  // theta ~ 0
  }
  return (theta / vn) * q.vec();
}

inline Vec6 se3_log(const RigidTransform& t) {
  Vec6 xi;
  const Vec3 omega = so3_log(t.rotation);
  xi.head<3>() = omega;
  xi.tail<3>() = so3_left_jacobian_inv(omega) * t.translation;
  return xi;
}

// Adjoint of SE(3) for the [omega; v] ordering.
inline Mat6 se3_adjoint(const RigidTransform& t) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = t.rotation;
  ad.bottomRightCorner<3, 3>() = t.rotation;
  ad.bottomLeftCorner<3, 3>() = skew(t.translation) * t.rotation;
  return ad;
}

// ad(xi): the small adjoint, d/dt Ad(exp(t xi)) at t = 0.
inline Mat6 se3_small_adjoint(const Vec6& xi) {
  Mat6 ad = Mat6::Zero();
  const Mat3 w = skew(xi.head<3>());
  ad.topLeftCorner<3, 3>() = w;
  ad.bottomRightCorner<3, 3>() = w;
  ad.bottomLeftCorner<3, 3>() = skew(xi.tail<3>());
  return ad;
}

// Left Jacobian of SE(3), evaluated by its power series
//   Jl(xi) = sum_{n>=0} ad(xi)^n / (n+1)!
// The series converges fast for the twist magnitudes seen here and avoids the
// error-prone closed-form coupling block.
inline Mat6 se3_left_jacobian(const Vec6& xi) {
  const Mat6 ad = se3_small_adjoint(xi);
  Mat6 sum = Mat6::Identity();
  Mat6 term = Mat6::Identity();
  for (int n = 1; n < 80; ++n) {
    term = (term * ad) / double(n + 1);
    sum += term;
    if (term.norm() < 1e-18 * sum.norm()) break;
  }
  return sum;
}

inline Mat6 se3_right_jacobian(const Vec6& xi) { return se3_left_jacobian(-xi); }

inline Mat6 se3_right_jacobian_inv(const Vec6& xi) {
  return se3_right_jacobian(xi).inverse();
}

// ---------------------------------------------------------------------------
// Planes. Stored as (unit normal n, signed offset d) with the convention
// { x : n.x + d = 0 }, so the origin-distance singularity of the homogeneous
// [a,b,c,1] form never arises.

struct PlaneHypothesis {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

inline double point_plane_distance(const PlaneHypothesis& plane, const Vec3& p) {
  return plane.distance(p);
}

// Plane seen through a rigid transform: if x satisfies n.x + d = 0 then
// y = R x + t satisfies (R n).y + (d - (R n).t) = 0.
inline PlaneHypothesis transform_plane(const RigidTransform& t, const PlaneHypothesis& p) {
  PlaneHypothesis out;
  out.normal = t.rotation * p.normal;
  out.offset = p.offset - out.normal.dot(t.translation);
  return out;
}

// Least-squares plane through a point set: normal is the smallest-eigenvalue
// direction of the centered scatter matrix. Throws DegenerateInput for fewer
// than 3 points or (near-)collinear input, detected as equal smallest
// eigenvalues.
inline PlaneHypothesis fit_plane_ls(std::span<const Vec3> points) {
  if (points.size() < 3) {
    throw DegenerateInput("fit_plane_ls: need at least 3 points, got " +
                          std::to_string(points.size()));
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= double(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 evals = eig.eigenvalues();  // ascending
  if (evals[1] - evals[0] <= 1e-9 * std::max(evals[2], 1e-300)) {
    throw DegenerateInput("fit_plane_ls: collinear or coincident points");
  }
  Vec3 n = eig.eigenvectors().col(0).normalized();
  // Deterministic sign: make the largest-magnitude component positive.
  int k;
  n.cwiseAbs().maxCoeff(&k);
  if (n[k] < 0) n = -n;
  return PlaneHypothesis{n, -n.dot(centroid)};
}

inline PlaneHypothesis fit_plane_ls(const std::vector<Vec3>& points) {
  return fit_plane_ls(std::span<const Vec3>(points));
}

// Same fit but with the normal flipped toward a viewpoint (the fragment's
// sensor origin), keeping point-to-plane residual signs consistent.
inline PlaneHypothesis fit_plane_ls_oriented(std::span<const Vec3> points,
                                             const Vec3& toward) {
  PlaneHypothesis p = fit_plane_ls(points);
  if (p.signed_distance(toward) < 0) {
    p.normal = -p.normal;
    p.offset = -p.offset;
  }
  return p;
}

// Least-squares fit with residual-outlier trimming: points whose residual
// exceeds 3x the median absolute residual are dropped and the plane refit.
// Recovers exact planes from labelings contaminated by a thin band of
// points from adjacent surfaces.
inline PlaneHypothesis trimmed_plane_fit(const std::vector<Vec3>& points, const Vec3& toward,
                                         int iterations = 2) {
  PlaneHypothesis plane = fit_plane_ls_oriented(points, toward);
  std::vector<Vec3> kept;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> residuals;
    residuals.reserve(points.size());
    for (const auto& p : points) residuals.push_back(plane.distance(p));
    std::vector<double> sorted = residuals;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double threshold = 3.0 * sorted[sorted.size() / 2] + 1e-12;
    kept.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (residuals[i] <= threshold) kept.push_back(points[i]);
    }
    if (kept.size() < 3 || kept.size() == points.size()) break;
    try {
      plane = fit_plane_ls_oriented(kept, toward);
    } catch (const DegenerateInput&) {
      break;
    }
  }
  return plane;
}

// Offset of the plane with fixed normal n through a point set, with the same
// median-based trimming applied to the projections n . p.
inline double trimmed_offset(const Vec3& normal, const std::vector<Vec3>& points) {
  std::vector<double> s;
  s.reserve(points.size());
  for (const auto& p : points) s.push_back(normal.dot(p));
  std::vector<double> sorted = s;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::vector<double> dev;
  dev.reserve(s.size());
  for (double v : s) dev.push_back(std::abs(v - median));
  sorted = dev;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double threshold = 3.0 * sorted[sorted.size() / 2] + 1e-12;
  double sum = 0;
  std::size_t count = 0;
  for (double v : s) {
    if (std::abs(v - median) <= threshold) {
      sum += v;
      ++count;
    }
  }
  return count ? -sum / double(count) : -median;
}

// Deterministic right-handed basis (u, v) of the plane orthogonal to n.
inline std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& n) {
  Vec3 h = Vec3::UnitX();
  const Vec3 a = n.cwiseAbs();
  if (a.y() <= a.x() && a.y() <= a.z()) {
    h = Vec3::UnitY();
  } else if (a.z() <= a.x() && a.z() <= a.y()) {
    h = Vec3::UnitZ();
  }
  const Vec3 u = (h - h.dot(n) * n).normalized();
  return {u, n.cross(u)};
}

}  // namespace recon
