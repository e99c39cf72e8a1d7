// Layout-constrained global registration. Three residual families drive a
// joint Gauss-Newton solve over all fragment poses (pose 0 fixed):
//   layout rows:  (T_i(p) - q) . (R_i n_p)      q = virtual point on a layout plane
//   frag rows:    (T_i(p) - T_j(q)) . (R_i n_p)  point-to-plane across fragment pairs
//   pair rows:    entries of (T_i * T_tilde_ij - T_j), penalized by their
//                 absolute-value sum and handled by IRLS weights
// The outer loop alternates layout estimation with N inner Gauss-Newton
// steps, M times, with damping that keeps the total energy non-increasing
// inside each inner loop.

#pragma once

#include <optional>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/icp.hpp"
#include "recon/layout.hpp"
#include "recon/plane_extract.hpp"

namespace recon {

struct LayoutCorrespondence {
  int fragment = 0;
  int point = 0;
  Vec3 virtual_point = Vec3::Zero();  // world frame, on its layout plane
  Vec3 point_normal = Vec3::UnitZ();  // fragment-local
};

// A fragment pair in the constraint set I: consecutive fragments plus
// surviving loop closures, with the ICP pairwise transform (frame j -> i).
struct FragmentPair {
  int i = 0, j = 0;
  RigidTransform t_tilde;
  std::vector<Correspondence> corr;  // source points in fragment i, targets in j
};

struct RegistrationConfig {
  double lambda1 = -1.0;  // < 0: auto-balance from correspondence counts
  double lambda2 = -1.0;
  double layout_max_dist = 0.1;
  double pair_max_dist = 0.1;
  double max_normal_angle = 30.0 * M_PI / 180;
  int inner_iters = 10;   // N
  int outer_iters = 20;   // M
  double convergence_eps = 1e-5;  // outer-loop pose-change exit
  bool use_layout = true;
  bool refresh_pair_correspondences = false;
};

struct EnergyBreakdown {
  double e_layout = 0, e_frag = 0, e_pair = 0, total = 0;
  double lambda1 = 0, lambda2 = 0;
};

// ---------------------------------------------------------------------------
// Residuals and analytic Jacobians (left perturbation, [omega; v])

inline double layout_residual(const RigidTransform& t_i, const Vec3& p, const Vec3& n_p,
                              const Vec3& q, Vec6* jac = nullptr) {
  const Vec3 x = t_i.apply(p);
  const Vec3 m = t_i.rotation * n_p;
  if (jac) {
    jac->head<3>() = q.cross(m);
    jac->tail<3>() = m;
  }
  return (x - q).dot(m);
}

inline double frag_residual(const RigidTransform& t_i, const RigidTransform& t_j,
                            const Vec3& p, const Vec3& n_p, const Vec3& q,
                            Vec6* jac_i = nullptr, Vec6* jac_j = nullptr) {
  const Vec3 x = t_i.apply(p);
  const Vec3 y = t_j.apply(q);
  const Vec3 m = t_i.rotation * n_p;
  if (jac_i) {
    jac_i->head<3>() = y.cross(m);
    jac_i->tail<3>() = m;
  }
  if (jac_j) {
    jac_j->head<3>() = -y.cross(m);
    jac_j->tail<3>() = -m;
  }
  return (x - y).dot(m);
}

using PairResidual = Eigen::Matrix<double, 12, 1>;
using PairJacobian = Eigen::Matrix<double, 12, 6>;

// Entries of T_i * T_tilde - T_j as a 12-vector (three rotation columns, then
// the translation column).
inline PairResidual pair_residual(const RigidTransform& t_i, const RigidTransform& t_j,
                                  const RigidTransform& t_tilde, PairJacobian* jac_i = nullptr,
                                  PairJacobian* jac_j = nullptr) {
  const RigidTransform a = t_i * t_tilde;
  PairResidual r;
  for (int c = 0; c < 3; ++c) {
    r.segment<3>(3 * c) = a.rotation.col(c) - t_j.rotation.col(c);
  }
  r.tail<3>() = a.translation - t_j.translation;
  if (jac_i) {
    jac_i->setZero();
    for (int c = 0; c < 3; ++c) {
      jac_i->block<3, 3>(3 * c, 0) = -skew(a.rotation.col(c));
    }
    jac_i->block<3, 3>(9, 0) = -skew(a.translation);
    jac_i->block<3, 3>(9, 3) = Mat3::Identity();
  }
  if (jac_j) {
    jac_j->setZero();
    for (int c = 0; c < 3; ++c) {
      jac_j->block<3, 3>(3 * c, 0) = skew(t_j.rotation.col(c));
    }
    jac_j->block<3, 3>(9, 0) = skew(t_j.translation);
    jac_j->block<3, 3>(9, 3) = -Mat3::Identity();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Correspondence establishment

// Pairwise sets C_ij under the given poses, one source-to-target sweep per
// pair in I.
inline std::vector<FragmentPair> establish_pair_correspondences(
    const std::vector<Fragment>& fragments, const std::vector<RigidTransform>& poses,
    std::vector<FragmentPair> pairs, double max_dist, double max_normal_angle) {
  for (auto& pair : pairs) {
    const RigidTransform rel = poses[pair.j].inverse() * poses[pair.i];
    pair.corr = find_correspondences(fragments[pair.i], fragments[pair.j], rel, max_dist,
                                     max_normal_angle);
  }
  return pairs;
}

// Point-to-layout set C_i: world-frame points projected onto the nearest
// layout plane, kept when close enough and normal-consistent.
inline std::vector<LayoutCorrespondence> establish_layout_correspondences(
    const Fragment& fragment, int fragment_index, const RigidTransform& pose,
    const Layout& layout, double max_dist, double max_normal_angle) {
  const std::vector<PlaneHypothesis> planes = layout_planes(layout);
  const double min_cos = std::cos(max_normal_angle);
  std::vector<LayoutCorrespondence> out;
  for (int p = 0; p < int(fragment.points.size()); ++p) {
    const Vec3 world = pose.apply(fragment.points[p].position);
    const Vec3 normal_world = pose.rotation * fragment.points[p].normal;
    int best = -1;
    double best_dist = max_dist;
    for (int l = 0; l < int(planes.size()); ++l) {
      const double d = planes[l].distance(world);
      if (d <= best_dist) {
        best = l;
        best_dist = d;
      }
    }
    if (best < 0) continue;
    if (normal_world.dot(planes[best].normal) < min_cos) continue;
    out.push_back({fragment_index, p, planes[best].project(world),
                   fragment.points[p].normal});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Energy and the Gauss-Newton step

inline std::pair<double, double> resolve_weights(std::size_t n_layout, std::size_t n_frag,
                                                 std::size_t n_pairs,
                                                 const RegistrationConfig& config) {
  double l1 = config.lambda1, l2 = config.lambda2;
  const double base = n_layout > 0 ? double(n_layout) : std::max<double>(double(n_frag), 1.0);
  if (l1 < 0) l1 = n_frag > 0 ? base / double(n_frag) : 1.0;
  if (l2 < 0) l2 = base / (100.0 * std::max<std::size_t>(n_pairs, 1));
  return {l1, l2};
}

inline EnergyBreakdown energy(const std::vector<RigidTransform>& poses,
                              const std::vector<Fragment>& fragments,
                              const std::vector<FragmentPair>& pairs,
                              const std::vector<std::vector<LayoutCorrespondence>>& layout_corrs,
                              double lambda1, double lambda2) {
  EnergyBreakdown e;
  e.lambda1 = lambda1;
  e.lambda2 = lambda2;
  for (const auto& per_fragment : layout_corrs) {
    for (const auto& c : per_fragment) {
      const double r = layout_residual(poses[c.fragment],
                                       fragments[c.fragment].points[c.point].position,
                                       c.point_normal, c.virtual_point);
      e.e_layout += r * r;
    }
  }
  for (const auto& pair : pairs) {
    for (const auto& c : pair.corr) {
      const double r = frag_residual(poses[pair.i], poses[pair.j],
                                     fragments[pair.i].points[c.source_index].position,
                                     fragments[pair.i].points[c.source_index].normal,
                                     fragments[pair.j].points[c.target_index].position);
      e.e_frag += r * r;
    }
    e.e_pair += pair_residual(poses[pair.i], poses[pair.j], pair.t_tilde).cwiseAbs().sum();
  }
  e.total = e.e_layout + lambda1 * e.e_frag + lambda2 * e.e_pair;
  return e;
}

struct GaussNewtonResult {
  std::vector<RigidTransform> poses;
  EnergyBreakdown energy;
  double step_norm = 0;
};

inline GaussNewtonResult gauss_newton_step(
    const std::vector<RigidTransform>& poses, const std::vector<Fragment>& fragments,
    const std::vector<FragmentPair>& pairs,
    const std::vector<std::vector<LayoutCorrespondence>>& layout_corrs, double lambda1,
    double lambda2) {
  const int n = int(poses.size());
  const int dof = 6 * (n - 1);
  if (dof <= 0) {
    return {poses, energy(poses, fragments, pairs, layout_corrs, lambda1, lambda2), 0.0};
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dof, dof);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
  auto add_row = [&](int a, int b, const Vec6& ja, const Vec6& jb, double r, double w) {
    const int ia = 6 * (a - 1), ib = 6 * (b - 1);
    if (a > 0) {
      h.block<6, 6>(ia, ia) += w * ja * ja.transpose();
      g.segment<6>(ia) += w * ja * r;
    }
    if (b > 0) {
      h.block<6, 6>(ib, ib) += w * jb * jb.transpose();
      g.segment<6>(ib) += w * jb * r;
    }
    if (a > 0 && b > 0) {
      h.block<6, 6>(ia, ib) += w * ja * jb.transpose();
      h.block<6, 6>(ib, ia) += w * jb * ja.transpose();
    }
  };

  for (const auto& per_fragment : layout_corrs) {
    for (const auto& c : per_fragment) {
      if (c.fragment == 0) continue;  // gauge freedom only
      Vec6 jac;
      const double r = layout_residual(poses[c.fragment],
                                       fragments[c.fragment].points[c.point].position,
                                       c.point_normal, c.virtual_point, &jac);
      const int ia = 6 * (c.fragment - 1);
      h.block<6, 6>(ia, ia) += jac * jac.transpose();
      g.segment<6>(ia) += jac * r;
    }
  }
  for (const auto& pair : pairs) {
    for (const auto& c : pair.corr) {
      Vec6 ji, jj;
      const double r = frag_residual(poses[pair.i], poses[pair.j],
                                     fragments[pair.i].points[c.source_index].position,
                                     fragments[pair.i].points[c.source_index].normal,
                                     fragments[pair.j].points[c.target_index].position,
                                     &ji, &jj);
      add_row(pair.i, pair.j, ji, jj, r, lambda1);
    }
    // IRLS rows approximating the absolute-value sum of the matrix entries.
    PairJacobian ji, jj;
    const PairResidual r = pair_residual(poses[pair.i], poses[pair.j], pair.t_tilde, &ji, &jj);
    for (int k = 0; k < 12; ++k) {
      const double w = lambda2 / std::max(std::abs(r[k]), 1e-6);
      add_row(pair.i, pair.j, ji.row(k), jj.row(k), r[k], w);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw SingularSystem("global registration: normal equations are rank-deficient");
  }
  const Eigen::VectorXd step = h.ldlt().solve(-g);

  const EnergyBreakdown before =
      energy(poses, fragments, pairs, layout_corrs, lambda1, lambda2);
  auto apply = [&](double scale) {
    std::vector<RigidTransform> trial = poses;
    for (int k = 1; k < n; ++k) {
      trial[k] = se3_exp(Vec6(scale * step.segment<6>(6 * (k - 1)))) * poses[k];
    }
    return trial;
  };
  double scale = 1.0;
  std::vector<RigidTransform> trial = apply(scale);
  EnergyBreakdown after = energy(trial, fragments, pairs, layout_corrs, lambda1, lambda2);
  for (int halving = 0; after.total > before.total && halving < 8; ++halving) {
    scale *= 0.5;
    trial = apply(scale);
    after = energy(trial, fragments, pairs, layout_corrs, lambda1, lambda2);
  }
  if (after.total > before.total) {
    return {poses, before, 0.0};  // keep the current poses
  }
  return {std::move(trial), after, scale * step.norm()};
}

// ---------------------------------------------------------------------------
// Joint layout estimation and global registration

struct JointTraceRow {
  int outer = 0;
  double e_layout = 0, e_frag = 0, e_pair = 0, total = 0;
  int layout_planes = 0;
};

struct JointResult {
  std::vector<RigidTransform> poses;
  std::optional<Layout> layout;
  std::vector<JointTraceRow> trace;
  // Inner-loop energy sequences, one vector per outer iteration; each is
  // non-increasing by the damping guarantee.
  std::vector<std::vector<double>> inner_energies;
  bool layout_found = true;
};

inline JointResult joint_optimize(const std::vector<Fragment>& fragments,
                                  const std::vector<RigidTransform>& initial_poses,
                                  std::vector<FragmentPair> pairs,
                                  const RegistrationConfig& config,
                                  const PlaneExtractParams& extract_params = {},
                                  const LayoutEstimateParams& layout_params = {}) {
  JointResult result;
  result.poses = initial_poses;
  if (!result.poses.empty()) result.poses[0] = RigidTransform::Identity();

  pairs = establish_pair_correspondences(fragments, result.poses, std::move(pairs),
                                         config.pair_max_dist, config.max_normal_angle);

  // Plane extraction works in fragment-local coordinates and is therefore
  // computed once; only the world-frame merge depends on the current poses.
  std::vector<PlaneLabeling> labelings;
  if (config.use_layout) {
    for (const auto& f : fragments) {
      labelings.push_back(extract_fragment_planes(f, extract_params));
    }
  }

  for (int outer = 1; outer <= config.outer_iters; ++outer) {
    std::optional<Layout> layout;
    if (config.use_layout) {
      layout = estimate_layout(labelings, result.poses, fragments, layout_params);
      if (!layout) {
        // No base plane: fall back to the incoming poses and flag the trace.
        result.layout_found = false;
        if (outer == 1) result.poses = initial_poses;
        result.trace.push_back({outer, 0, 0, 0, 0, 0});
        break;
      }
      result.layout = layout;
    }

    std::vector<std::vector<LayoutCorrespondence>> layout_corrs(fragments.size());
    std::size_t n_layout = 0, n_frag = 0;
    if (layout) {
      for (int f = 0; f < int(fragments.size()); ++f) {
        layout_corrs[f] = establish_layout_correspondences(
            fragments[f], f, result.poses[f], *layout, config.layout_max_dist,
            config.max_normal_angle);
        n_layout += layout_corrs[f].size();
      }
    }
    for (const auto& p : pairs) n_frag += p.corr.size();
    const auto [lambda1, lambda2] = resolve_weights(n_layout, n_frag, pairs.size(), config);

    std::vector<double> inner;
    EnergyBreakdown last =
        energy(result.poses, fragments, pairs, layout_corrs, lambda1, lambda2);
    inner.push_back(last.total);
    const std::vector<RigidTransform> outer_start = result.poses;
    for (int it = 0; it < config.inner_iters; ++it) {
      GaussNewtonResult gn = gauss_newton_step(result.poses, fragments, pairs, layout_corrs,
                                               lambda1, lambda2);
      result.poses = std::move(gn.poses);
      last = gn.energy;
      inner.push_back(last.total);
      if (gn.step_norm < 1e-10) break;
    }
    result.inner_energies.push_back(std::move(inner));
    result.trace.push_back({outer, last.e_layout, last.e_frag, last.e_pair, last.total,
                            layout ? int(layout_planes(*layout).size()) : 0});

    double pose_change = 0;
    for (std::size_t k = 0; k < result.poses.size(); ++k) {
      pose_change = std::max(
          pose_change, se3_log(result.poses[k] * outer_start[k].inverse()).norm());
    }
    if (config.refresh_pair_correspondences) {
      pairs = establish_pair_correspondences(fragments, result.poses, std::move(pairs),
                                             config.pair_max_dist, config.max_normal_angle);
    }
    if (pose_change < config.convergence_eps) break;
  }
  return result;
}

}  // namespace recon
