// Multi-label plane assignment by alpha-expansion. The energy is
//   E(h) = sum_p D_p(h_p) + sum_(p,q) potts * [h_p != h_q]
// with D_p(l) the point-to-plane distance for plane labels and the constant
// null cost gamma for the outlier label. Each expansion move is one min-cut
// over a binary graph built with the standard submodular decomposition.

#pragma once

#include <optional>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/kdtree.hpp"
#include "recon/maxflow.hpp"

namespace recon {

constexpr int kNullLabel = -1;

struct EnergyParams {
  double potts_weight = 0.02;  // alpha
  double null_cost = 0.05;     // gamma, meters
  int neighbor_k = 8;
  double neighbor_radius = 0.15;  // meters
  int min_support = 50;           // planes below this inlier count are dropped
};

struct PlaneLabeling {
  std::vector<int> labels;  // per point: plane index or kNullLabel
  std::vector<PlaneHypothesis> planes;
};

// Unordered, deduplicated neighbor pairs: k nearest neighbors filtered to the
// radius.
inline std::vector<std::pair<int, int>> knn_neighbor_pairs(const std::vector<Vec3>& points,
                                                           int k, double radius) {
  std::vector<std::pair<int, int>> pairs;
  SpatialIndex index(points);
  const double r2 = radius * radius;
  for (int i = 0; i < int(points.size()); ++i) {
    for (const Neighbor& nb : index.knn(points[i], k + 1)) {
      if (nb.index == i || nb.dist2 > r2) continue;
      pairs.emplace_back(std::min(i, nb.index), std::max(i, nb.index));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

inline double labeling_energy(const Fragment& fragment, const std::vector<int>& labels,
                              const std::vector<PlaneHypothesis>& planes,
                              const std::vector<std::pair<int, int>>& pairs,
                              const EnergyParams& params) {
  double e = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    e += labels[i] == kNullLabel ? params.null_cost
                                 : planes[labels[i]].distance(fragment.points[i].position);
  }
  for (const auto& [p, q] : pairs) {
    if (labels[p] != labels[q]) e += params.potts_weight;
  }
  return e;
}

namespace detail {

// One alpha-expansion move; returns the labeling reached by the min cut.
inline std::vector<int> expansion_move(const Fragment& fragment,
                                       const std::vector<int>& labels,
                                       const std::vector<PlaneHypothesis>& planes,
                                       const std::vector<std::pair<int, int>>& pairs,
                                       const EnergyParams& params, int alpha) {
  const int n = int(labels.size());
  MaxFlowGraph graph(n);
  auto data_cost = [&](int point, int label) {
    return label == kNullLabel ? params.null_cost
                               : planes[label].distance(fragment.points[point].position);
  };
  // Unary terms: pay cost(keep) on the sink side (x=0), cost(alpha) on the
  // source side (x=1).
  for (int p = 0; p < n; ++p) {
    graph.add_source_edge(p, data_cost(p, labels[p]));
    graph.add_sink_edge(p, data_cost(p, alpha));
  }
  // Pairwise Potts, decomposed as
  //   E = A + (C-A) x_p + (D-C) x_q + (B+C-A-D) (1-x_p) x_q
  // with A=E(0,0), B=E(0,1), C=E(1,0), D=E(1,1)=0.
  const double w = params.potts_weight;
  for (const auto& [p, q] : pairs) {
    const double a = w * (labels[p] != labels[q]);
    const double b = w * (labels[p] != alpha);
    const double c = w * (alpha != labels[q]);
    const double cp = c - a;   // unary on x_p
    const double cq = 0 - c;   // unary on x_q
    if (cp > 0) {
      graph.add_sink_edge(p, cp);
    } else if (cp < 0) {
      graph.add_source_edge(p, -cp);
    }
    if (cq > 0) {
      graph.add_sink_edge(q, cq);
    } else if (cq < 0) {
      graph.add_source_edge(q, -cq);
    }
    const double pair_cap = b + c - a;  // >= 0 for Potts
    if (pair_cap > 0) graph.add_edge(q, p, pair_cap);
  }
  graph.solve();
  std::vector<int> moved(labels);
  for (int p = 0; p < n; ++p) {
    if (graph.source_side(p)) moved[p] = alpha;
  }
  return moved;
}

}  // namespace detail

// move_energies, when given, records the energy after every expansion move;
// it is non-increasing by construction.
inline PlaneLabeling graphcut_assign(const Fragment& fragment,
                                     const std::vector<PlaneHypothesis>& planes,
                                     const EnergyParams& params,
                                     std::vector<double>* move_energies = nullptr) {
  if (planes.empty()) throw NoPlanes("graphcut_assign: empty plane set");
  const int n = int(fragment.points.size());
  const auto pairs =
      knn_neighbor_pairs(positions(fragment), params.neighbor_k, params.neighbor_radius);

  // Initial labeling: per-point best data cost, ties to the lower label.
  std::vector<int> labels(n, kNullLabel);
  for (int p = 0; p < n; ++p) {
    double best = params.null_cost;
    for (int l = 0; l < int(planes.size()); ++l) {
      const double d = planes[l].distance(fragment.points[p].position);
      if (d < best) {
        best = d;
        labels[p] = l;
      }
    }
  }
  double energy = labeling_energy(fragment, labels, planes, pairs, params);
  if (move_energies) move_energies->push_back(energy);

  constexpr int kMaxSweeps = 8;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool changed = false;
    for (int alpha = kNullLabel; alpha < int(planes.size()); ++alpha) {
      const auto moved = detail::expansion_move(fragment, labels, planes, pairs, params, alpha);
      const double moved_energy = labeling_energy(fragment, moved, planes, pairs, params);
      if (moved_energy < energy - 1e-15) {
        labels = moved;
        energy = moved_energy;
        changed = true;
      }
      if (move_energies) move_energies->push_back(energy);
    }
    if (!changed) break;
  }

  // Drop planes with too little support and relabel their points as outliers.
  std::vector<int> count(planes.size(), 0);
  for (int l : labels) {
    if (l != kNullLabel) ++count[l];
  }
  PlaneLabeling out;
  std::vector<int> remap(planes.size(), kNullLabel);
  for (int l = 0; l < int(planes.size()); ++l) {
    if (count[l] >= params.min_support) {
      remap[l] = int(out.planes.size());
      out.planes.push_back(planes[l]);
    }
  }
  out.labels.resize(n);
  for (int p = 0; p < n; ++p) {
    out.labels[p] = labels[p] == kNullLabel ? kNullLabel : remap[labels[p]];
  }
  return out;
}

}  // namespace recon
