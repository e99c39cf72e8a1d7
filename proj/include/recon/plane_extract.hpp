// Per-fragment plane extraction: oversegment -> sample hypotheses -> HAC ->
// graph-cut assignment, with plane refits on the inlier sets between
// assignment rounds.

#pragma once

#include <vector>

#include "recon/fragment.hpp"
#include "recon/graphcut.hpp"
#include "recon/hac.hpp"
#include "recon/oversegment.hpp"
#include "recon/plane_hypotheses.hpp"

namespace recon {

struct PlaneExtractParams {
  double seed_resolution = 0.25;   // meters
  double merge_threshold = 0.05;   // meters, HAC stop
  double hypothesis_max_cost = 0.02;  // triples that fit their own support worse are dropped
  int min_hypothesis_support = 12;    // pooled points a triple must carry
  int max_support_eval = 120;         // per-hypothesis support cap for HAC costs
  int assign_rounds = 2;              // assign -> refit -> assign
  EnergyParams energy;
};

namespace detail {

inline std::vector<Vec3> stride_sample(const std::vector<Vec3>& points, int cap) {
  if (int(points.size()) <= cap) return points;
  std::vector<Vec3> out;
  out.reserve(cap);
  const double stride = double(points.size()) / cap;
  for (int k = 0; k < cap; ++k) out.push_back(points[std::size_t(k * stride)]);
  return out;
}

// Collapse near-identical hypotheses (normals within ~1 degree, offsets
// within 2 mm) keeping the lowest-index representative; their supports pool.
inline void collapse_duplicates(std::vector<PlaneHypothesis>* planes,
                                std::vector<std::vector<Vec3>>* supports) {
  const double min_cos = std::cos(1.0 * M_PI / 180.0);
  const int n = int(planes->size());
  std::vector<int> owner(n);
  for (int i = 0; i < n; ++i) owner[i] = i;
  for (int i = 0; i < n; ++i) {
    if (owner[i] != i) continue;
    for (int j = i + 1; j < n; ++j) {
      if (owner[j] != j) continue;
      if ((*planes)[i].normal.dot((*planes)[j].normal) >= min_cos &&
          std::abs((*planes)[i].offset - (*planes)[j].offset) <= 0.002) {
        owner[j] = i;
      }
    }
  }
  std::vector<PlaneHypothesis> out_planes;
  std::vector<std::vector<Vec3>> out_supports;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    if (owner[i] == i) {
      slot[i] = int(out_planes.size());
      out_planes.push_back((*planes)[i]);
      out_supports.push_back(std::move((*supports)[i]));
    } else {
      auto& dst = out_supports[slot[owner[i]]];
      dst.insert(dst.end(), (*supports)[i].begin(), (*supports)[i].end());
    }
  }
  *planes = std::move(out_planes);
  *supports = std::move(out_supports);
}

inline std::vector<PlaneHypothesis> refit_on_inliers(const Fragment& fragment,
                                                     const PlaneLabeling& labeling) {
  std::vector<std::vector<Vec3>> inliers(labeling.planes.size());
  for (std::size_t p = 0; p < labeling.labels.size(); ++p) {
    if (labeling.labels[p] != kNullLabel) {
      inliers[labeling.labels[p]].push_back(fragment.points[p].position);
    }
  }
  std::vector<PlaneHypothesis> out;
  for (std::size_t l = 0; l < labeling.planes.size(); ++l) {
    try {
      out.push_back(trimmed_plane_fit(inliers[l], fragment.sensor_origin));
    } catch (const DegenerateInput&) {
      out.push_back(labeling.planes[l]);  // keep the previous estimate
    }
  }
  return out;
}

}  // namespace detail

inline PlaneLabeling extract_fragment_planes(const Fragment& fragment,
                                             const PlaneExtractParams& params) {
  PlaneLabeling empty;
  empty.labels.assign(fragment.points.size(), kNullLabel);

  const auto segments = oversegment(fragment, params.seed_resolution);

  // Segments too small to contribute a meaningful share of a triple's support
  // are excluded from sampling (their points are still labeled later).
  const int min_seg = std::max(1, params.min_hypothesis_support / 3);
  std::vector<Segment> sampling = segments;
  for (auto& s : sampling) {
    std::vector<int> adj;
    for (int t : s.adjacency) {
      if (int(sampling[t].point_indices.size()) >= min_seg) adj.push_back(t);
    }
    s.adjacency = int(s.point_indices.size()) >= min_seg ? adj : std::vector<int>{};
  }

  std::vector<std::array<int, 3>> triples;
  std::vector<PlaneHypothesis> hypotheses = sample_hypotheses(sampling, fragment, &triples);
  if (hypotheses.empty()) return empty;

  // Support of a triple hypothesis: the pooled points of its three segments.
  // Triples that fit their own support poorly straddle a crease; triples of
  // near-singleton segments carry no evidence beyond their defining points.
  // Both are dropped before clustering.
  std::vector<PlaneHypothesis> kept;
  std::vector<std::vector<Vec3>> supports;
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    std::vector<Vec3> pooled;
    for (int seg : triples[h]) {
      for (int idx : segments[seg].point_indices) {
        pooled.push_back(fragment.points[idx].position);
      }
    }
    if (int(pooled.size()) < params.min_hypothesis_support) continue;
    if (mean_plane_distance(hypotheses[h], pooled) > params.hypothesis_max_cost) continue;
    kept.push_back(hypotheses[h]);
    supports.push_back(detail::stride_sample(pooled, params.max_support_eval));
  }
  if (kept.empty()) return empty;

  detail::collapse_duplicates(&kept, &supports);
  for (auto& s : supports) s = detail::stride_sample(s, params.max_support_eval);
  std::vector<PlaneHypothesis> planes = hac_cluster(kept, supports, params.merge_threshold);
  if (planes.empty()) return empty;

  PlaneLabeling labeling;
  for (int round = 0; round < params.assign_rounds; ++round) {
    labeling = graphcut_assign(fragment, planes, params.energy);
    if (labeling.planes.empty()) return empty;
    planes = detail::refit_on_inliers(fragment, labeling);
    labeling.planes = planes;
  }
  return labeling;
}

}  // namespace recon
