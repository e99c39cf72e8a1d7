// Plane hypothesis generation from segment triples and the mean
// point-to-plane cost used throughout clustering.

#pragma once

#include <array>
#include <set>
#include <vector>

#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/oversegment.hpp"

namespace recon {

// Mean point-to-plane distance over a segment's points.
inline double segment_plane_cost(const PlaneHypothesis& plane, const Segment& segment,
                                 const Fragment& fragment) {
  double s = 0;
  for (int i : segment.point_indices) s += plane.distance(fragment.points[i].position);
  return s / double(segment.point_indices.size());
}

inline double mean_plane_distance(const PlaneHypothesis& plane,
                                  const std::vector<Vec3>& points) {
  double s = 0;
  for (const auto& p : points) s += plane.distance(p);
  return points.empty() ? 0.0 : s / double(points.size());
}

// One hypothesis per connected triple: a segment plus two of its neighbors,
// the plane passing through the three centroids. Collinear triples are
// skipped; normals face the fragment's sensor origin. Optionally reports the
// generating triple of each hypothesis.
inline std::vector<PlaneHypothesis> sample_hypotheses(
    const std::vector<Segment>& segments, const Fragment& fragment,
    std::vector<std::array<int, 3>>* triples = nullptr) {
  std::vector<PlaneHypothesis> out;
  std::set<std::array<int, 3>> seen;
  for (int s = 0; s < int(segments.size()); ++s) {
    const auto& nbrs = segments[s].adjacency;
    for (std::size_t a = 0; a < nbrs.size(); ++a) {
      for (std::size_t b = a + 1; b < nbrs.size(); ++b) {
        std::array<int, 3> key{s, nbrs[a], nbrs[b]};
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) continue;

        const Vec3 c0 = segments[key[0]].centroid;
        const Vec3 c1 = segments[key[1]].centroid;
        const Vec3 c2 = segments[key[2]].centroid;
        Vec3 n = (c1 - c0).cross(c2 - c0);
        const double scale = std::max({(c1 - c0).norm(), (c2 - c0).norm(), 1e-12});
        if (n.norm() < 1e-9 * scale * scale) continue;  // collinear centroids
        n.normalize();
        PlaneHypothesis plane{n, -n.dot(c0)};
        if (plane.signed_distance(fragment.sensor_origin) < 0) {
          plane.normal = -plane.normal;
          plane.offset = -plane.offset;
        }
        out.push_back(plane);
        if (triples) triples->push_back(key);
      }
    }
  }
  return out;
}

}  // namespace recon
