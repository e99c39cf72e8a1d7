// Fragment and Dataset value types. A fragment is a rigid piece of scene
// geometry in its own local frame; a dataset is the ordered fragment list
// plus consecutive-pair odometry and optional ground truth.

#pragma once

#include <vector>

#include "recon/geometry.hpp"

namespace recon {

struct Fragment {
  int id = 0;
  std::vector<OrientedPoint> points;   // local coordinates, unit normals
  Vec3 sensor_origin = Vec3::Zero();   // local coordinates
};

inline std::vector<Vec3> positions(const Fragment& f) {
  std::vector<Vec3> out;
  out.reserve(f.points.size());
  for (const auto& p : f.points) out.push_back(p.position);
  return out;
}

inline Vec3 centroid(const Fragment& f) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : f.points) c += p.position;
  return f.points.empty() ? c : Vec3(c / double(f.points.size()));
}

// Bounding-box diagonal in the fragment's local frame.
inline double fragment_diameter(const Fragment& f) {
  if (f.points.empty()) return 0.0;
  Vec3 lo = f.points[0].position, hi = lo;
  for (const auto& p : f.points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  return (hi - lo).norm();
}

struct Dataset {
  std::vector<Fragment> fragments;
  std::vector<RigidTransform> odometry;       // size |fragments| - 1, maps frame i+1 -> i
  std::vector<RigidTransform> ground_truth;   // empty, or one absolute pose per fragment
  std::vector<OrientedPoint> ground_truth_cloud;  // optional reference surface samples

  bool has_ground_truth() const { return !ground_truth.empty(); }
};

}  // namespace recon
