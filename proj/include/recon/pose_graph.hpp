// Initial global registration: odometry chain, loop-closure detection by
// overlap ratio, and pose-graph optimization with a per-loop-edge line
// process that suppresses spurious closures.
//
// The alternating solver interleaves a damped Gauss-Newton step on all poses
// (node 0 fixed) with a closed-form line-weight update. With the smooth
// prior mu*(sqrt(l)-1)^2 the update is l = (mu / (mu + r))^2 for a weighted
// squared edge residual r; the boundary-minimum rule of the sqrt(1-l^2)
// prior is available as hard gating.

#pragma once

#include <queue>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/icp.hpp"

namespace recon {

struct OdometryEdge {
  int i = 0, j = 0;  // j == i + 1
  RigidTransform measured;  // maps frame j into frame i
  double weight = 1.0;
};

struct LoopEdge {
  int i = 0, j = 0;  // j > i + 1
  RigidTransform measured;
  double weight = 1.0;
  double line_weight = 1.0;  // l in [0, 1]
};

struct PoseGraph {
  std::vector<RigidTransform> nodes;  // node 0 is the gauge, kept at identity
  std::vector<OdometryEdge> odometry_edges;
  std::vector<LoopEdge> loop_edges;
};

struct LoopCandidate {
  int i = 0, j = 0;
  RigidTransform transform;  // refined T maps frame j into frame i
  double overlap = 0.0;
};

// r = log( T_ab^-1 * Ta^-1 * Tb ); zero iff Ta^-1 Tb equals the measurement.
// Jacobians are w.r.t. left perturbations of Ta and Tb and share a common
// factor: J_b = Jr^-1(r) Ad(Tb^-1), J_a = -J_b.
inline Vec6 pose_residual(const RigidTransform& ta, const RigidTransform& tb,
                          const RigidTransform& t_ab, Mat6* j_a = nullptr,
                          Mat6* j_b = nullptr) {
  const Vec6 r = se3_log(t_ab.inverse() * ta.inverse() * tb);
  if (j_a || j_b) {
    const Mat6 k = se3_right_jacobian_inv(r) * se3_adjoint(tb.inverse());
    if (j_b) *j_b = k;
    if (j_a) *j_a = -k;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Loop-closure detection

struct LoopDetectParams {
  double overlap_threshold = 0.30;
  double overlap_dist = 0.1;   // nearest-neighbor gate when measuring overlap
  double gate_factor = 2.0;    // centroid gate in units of mean fragment diameter
  IcpParams icp;
};

// For every inconsecutive pair whose current pose estimates put the fragments
// near each other, refine the relative pose by ICP and keep the pair when the
// resulting overlap ratio clears the threshold.
inline std::vector<LoopCandidate> detect_loop_closures(
    const Dataset& dataset, const std::vector<RigidTransform>& poses,
    const LoopDetectParams& params) {
  const int n = int(dataset.fragments.size());
  std::vector<Vec3> centroids(n);
  std::vector<double> diameters(n);
  for (int i = 0; i < n; ++i) {
    centroids[i] = poses[i].apply(centroid(dataset.fragments[i]));
    diameters[i] = fragment_diameter(dataset.fragments[i]);
  }

  std::vector<LoopCandidate> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      const double gate = params.gate_factor * 0.5 * (diameters[i] + diameters[j]);
      if ((centroids[i] - centroids[j]).norm() > gate) continue;
      const RigidTransform t0 = poses[i].inverse() * poses[j];
      IcpResult icp;
      try {
        icp = icp_point_to_plane(dataset.fragments[j], dataset.fragments[i], t0, params.icp);
      } catch (const InsufficientCorrespondences&) {
        continue;
      }
      const double overlap = overlap_ratio(dataset.fragments[j], dataset.fragments[i],
                                           icp.transform, params.overlap_dist);
      if (overlap >= params.overlap_threshold) {
        out.push_back({i, j, icp.transform, overlap});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pose-graph optimization

struct PoseGraphParams {
  double mu = 0.0025;        // (0.05 m)^2, scale of the line-process prior
  bool hard_gating = false;  // boundary rule of the sqrt(1 - l^2) prior
  int max_outer = 50;
  double convergence = 1e-12;  // relative objective decrease
};

namespace detail {

inline double line_prior(double l, const PoseGraphParams& p) {
  if (p.hard_gating) return p.mu * std::sqrt(std::max(0.0, 1.0 - l * l));
  const double s = std::sqrt(std::max(0.0, l));
  return p.mu * (s - 1.0) * (s - 1.0);
}

inline double pose_graph_objective(const PoseGraph& g, const PoseGraphParams& p) {
  double e = 0;
  for (const auto& edge : g.odometry_edges) {
    e += edge.weight * pose_residual(g.nodes[edge.i], g.nodes[edge.j], edge.measured)
                           .squaredNorm();
  }
  for (const auto& edge : g.loop_edges) {
    e += edge.line_weight * edge.weight *
         pose_residual(g.nodes[edge.i], g.nodes[edge.j], edge.measured).squaredNorm();
    e += line_prior(edge.line_weight, p);
  }
  return e;
}

inline void check_odometry_connected(const PoseGraph& g) {
  const int n = int(g.nodes.size());
  std::vector<char> seen(n, 0);
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : g.odometry_edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  if (count != n) {
    throw NotConnected("pose graph: odometry edges do not connect all fragments");
  }
}

}  // namespace detail

// Alternates a damped Gauss-Newton step over all node poses with the
// closed-form line-weight update. The returned trace holds the objective
// after every half-step; it is non-increasing by construction.
inline PoseGraph optimize_pose_graph(PoseGraph graph, const PoseGraphParams& params = {},
                                     std::vector<double>* objective_trace = nullptr) {
  const int n = int(graph.nodes.size());
  if (n == 0) throw NotConnected("pose graph: empty");
  detail::check_odometry_connected(graph);
  graph.nodes[0] = RigidTransform::Identity();
  if (n == 1) return graph;

  const int dof = 6 * (n - 1);
  auto push_trace = [&](double e) {
    if (objective_trace) objective_trace->push_back(e);
  };

  double energy = detail::pose_graph_objective(graph, params);
  push_trace(energy);

  for (int outer = 0; outer < params.max_outer; ++outer) {
    // (a) Gauss-Newton on poses, line weights fixed.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dof, dof);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
    auto accumulate = [&](int a, int b, const RigidTransform& measured, double w) {
      Mat6 ja, jb;
      const Vec6 r = pose_residual(graph.nodes[a], graph.nodes[b], measured, &ja, &jb);
      const int ia = 6 * (a - 1), ib = 6 * (b - 1);
      if (a > 0) {
        h.block<6, 6>(ia, ia) += w * ja.transpose() * ja;
        g.segment<6>(ia) += w * ja.transpose() * r;
      }
      if (b > 0) {
        h.block<6, 6>(ib, ib) += w * jb.transpose() * jb;
        g.segment<6>(ib) += w * jb.transpose() * r;
      }
      if (a > 0 && b > 0) {
        h.block<6, 6>(ia, ib) += w * ja.transpose() * jb;
        h.block<6, 6>(ib, ia) += w * jb.transpose() * ja;
      }
    };
    for (const auto& e : graph.odometry_edges) accumulate(e.i, e.j, e.measured, e.weight);
    for (const auto& e : graph.loop_edges) {
      accumulate(e.i, e.j, e.measured, e.weight * e.line_weight);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      throw SingularSystem("pose graph: normal equations are rank-deficient");
    }
    Eigen::VectorXd step = h.ldlt().solve(-g);

    auto apply = [&](double scale) {
      PoseGraph trial = graph;
      for (int k = 1; k < n; ++k) {
        trial.nodes[k] = se3_exp(Vec6(scale * step.segment<6>(6 * (k - 1)))) * graph.nodes[k];
      }
      return trial;
    };
    double scale = 1.0;
    PoseGraph trial = apply(scale);
    double trial_energy = detail::pose_graph_objective(trial, params);
    for (int halving = 0; trial_energy > energy && halving < 8; ++halving) {
      scale *= 0.5;
      trial = apply(scale);
      trial_energy = detail::pose_graph_objective(trial, params);
    }
    const double step_norm = scale * step.norm();
    if (trial_energy <= energy) {
      graph = std::move(trial);
      energy = trial_energy;
    }
    push_trace(energy);

    // (b) closed-form line-weight update.
    for (auto& e : graph.loop_edges) {
      const double r = e.weight *
                       pose_residual(graph.nodes[e.i], graph.nodes[e.j], e.measured)
                           .squaredNorm();
      if (params.hard_gating) {
        e.line_weight = r < params.mu ? 1.0 : 0.0;
      } else {
        const double s = params.mu / (params.mu + r);
        e.line_weight = s * s;
      }
    }
    const double after_l = detail::pose_graph_objective(graph, params);
    push_trace(after_l);
    const double drop = energy - after_l;
    energy = after_l;

    if (drop + std::abs(step_norm) < params.convergence * (1.0 + std::abs(energy)) &&
        outer > 0) {
      break;
    }
  }
  return graph;
}

// Drops loop edges whose converged line weight falls below the threshold and
// resets the survivors' weights to 1.
inline PoseGraph prune_loops(PoseGraph graph, double threshold = 0.25) {
  std::vector<LoopEdge> kept;
  for (auto& e : graph.loop_edges) {
    if (e.line_weight >= threshold) {
      e.line_weight = 1.0;
      kept.push_back(e);
    }
  }
  graph.loop_edges = std::move(kept);
  return graph;
}

// Chained odometry: absolute poses from sequential composition, node 0 at
// identity.
inline std::vector<RigidTransform> chain_odometry(const std::vector<RigidTransform>& odometry) {
  std::vector<RigidTransform> poses;
  poses.push_back(RigidTransform::Identity());
  for (const auto& rel : odometry) poses.push_back(poses.back() * rel);
  return poses;
}

}  // namespace recon
