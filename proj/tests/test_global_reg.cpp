#include "recon/global_reg.hpp"

#include <gtest/gtest.h>

#include <random>

#include "recon/pose_graph.hpp"
#include "recon/synth.hpp"
#include "testing_util.hpp"

using namespace recon;
using namespace recon::testing;

namespace {

// Layout built directly from the generating room model.
Layout layout_from_model(const RoomModel& model) {
  Layout layout;
  layout.base.plane = model.envelope[RoomModel::kFloor];
  layout.base.world_points = {Vec3(1, 1, 0)};
  layout.base.inliers = {{0, 0}};
  for (int w = RoomModel::kFirstWall; w < int(model.envelope.size()); ++w) {
    DominantPlane wall;
    wall.plane = model.envelope[w];
    wall.world_points = {wall.plane.project(Vec3(1, 1, 1))};
    wall.inliers = {{0, 0}};
    layout.walls.push_back(wall);
  }
  return layout;
}

SyntheticRoomSpec box_spec(double density, int fragments, unsigned seed) {
  SyntheticRoomSpec spec;
  spec.floor_polygon = {{0, 0}, {4, 0}, {4, 3}, {0, 3}};
  spec.height = 2.5;
  spec.points_per_m2 = density;
  spec.fragment_count = fragments;
  spec.seed = seed;
  return spec;
}

// Poses re-anchored so fragment 0 sits at the identity.
std::vector<RigidTransform> anchored(const std::vector<RigidTransform>& poses) {
  std::vector<RigidTransform> out;
  const RigidTransform inv = poses[0].inverse();
  for (const auto& p : poses) out.push_back(inv * p);
  return out;
}

}  // namespace

TEST(Residuals, LayoutResidualJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(701);
  for (int trial = 0; trial < 120; ++trial) {
    const RigidTransform t = random_transform(rng);
    const Vec3 p = random_vec(rng, 2.0), q = random_vec(rng, 2.0);
    const Vec3 n = random_unit(rng);
    Vec6 jac;
    layout_residual(t, p, n, q, &jac);
    expect_gradient_matches(
        [&](const Vec6& d) { return layout_residual(se3_exp(d) * t, p, n, q); }, jac);
  }
}

TEST(Residuals, FragResidualJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(703);
  for (int trial = 0; trial < 120; ++trial) {
    const RigidTransform ti = random_transform(rng), tj = random_transform(rng);
    const Vec3 p = random_vec(rng, 2.0), q = random_vec(rng, 2.0);
    const Vec3 n = random_unit(rng);
    Vec6 ji, jj;
    frag_residual(ti, tj, p, n, q, &ji, &jj);
    expect_gradient_matches(
        [&](const Vec6& d) { return frag_residual(se3_exp(d) * ti, tj, p, n, q); }, ji);
    expect_gradient_matches(
        [&](const Vec6& d) { return frag_residual(ti, se3_exp(d) * tj, p, n, q); }, jj);
  }
}

TEST(Residuals, PairResidualJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(705);
  const double h = 1e-6;
  for (int trial = 0; trial < 120; ++trial) {
    const RigidTransform ti = random_transform(rng), tj = random_transform(rng);
    const RigidTransform tt = random_transform(rng);
    PairJacobian ji, jj;
    pair_residual(ti, tj, tt, &ji, &jj);
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      const PairResidual fd_i =
          (pair_residual(se3_exp(d) * ti, tj, tt) - pair_residual(se3_exp(-d) * ti, tj, tt)) /
          (2 * h);
      const PairResidual fd_j =
          (pair_residual(ti, se3_exp(d) * tj, tt) - pair_residual(ti, se3_exp(-d) * tj, tt)) /
          (2 * h);
      EXPECT_LT((fd_i - ji.col(k)).norm(), 1e-5 * std::max(1.0, fd_i.norm()));
      EXPECT_LT((fd_j - jj.col(k)).norm(), 1e-5 * std::max(1.0, fd_j.norm()));
    }
  }
}

TEST(EstablishLayoutCorrespondences, GatesAndProjection) {
  const RoomModel model = room_model(box_spec(50, 4, 1));
  const Layout layout = layout_from_model(model);

  Fragment frag;
  frag.points.push_back({Vec3(0.0, 1.5, 1.0), Vec3::UnitX()});   // exactly on wall x=0
  frag.points.push_back({Vec3(0.05, 1.5, 1.0), Vec3::UnitX()});  // 5 cm off the wall
  frag.points.push_back({Vec3(2.0, 1.5, 1.25), Vec3::UnitX()});  // interior clutter
  frag.points.push_back({Vec3(0.02, 1.5, 1.0), Vec3::UnitY()});  // normal disagrees

  const auto corrs = establish_layout_correspondences(frag, 0, RigidTransform::Identity(),
                                                      layout, 0.1, 30 * M_PI / 180);
  ASSERT_EQ(corrs.size(), 2u);
  EXPECT_EQ(corrs[0].point, 0);
  EXPECT_LT((corrs[0].virtual_point - frag.points[0].position).norm(), 1e-15);
  EXPECT_EQ(corrs[1].point, 1);
  EXPECT_NEAR((corrs[1].virtual_point - frag.points[1].position).norm(), 0.05, 1e-12);

  // Every virtual point satisfies its plane equation.
  for (const auto& c : corrs) {
    double best = 1e9;
    for (const auto& plane : layout_planes(layout)) {
      best = std::min(best, plane.distance(c.virtual_point));
    }
    EXPECT_LT(best, 1e-12);
  }
}

TEST(EstablishPairCorrespondences, SelfMatchAndDisjoint) {
  std::mt19937_64 rng(707);
  const Fragment a = corner_scene(12, 0.05, &rng, 0.0);
  Fragment far = a;
  for (auto& p : far.points) p.position += Vec3(100, 0, 0);

  std::vector<FragmentPair> pairs(2);
  pairs[0] = {0, 1, RigidTransform::Identity(), {}};
  pairs[1] = {0, 2, RigidTransform::Identity(), {}};
  const std::vector<RigidTransform> poses(3);
  const auto out = establish_pair_correspondences({a, a, far}, poses, pairs, 0.1,
                                                  30 * M_PI / 180);
  EXPECT_EQ(out[0].corr.size(), a.points.size());  // identical overlapping fragments
  for (const auto& c : out[0].corr) EXPECT_EQ(c.source_index, c.target_index);
  EXPECT_TRUE(out[1].corr.empty());  // disjoint pair contributes nothing
}

TEST(Energy, TrivialCases) {
  // Ground truth with exact inputs: zero total.
  const SyntheticRoomSpec spec = box_spec(120, 4, 3);
  const SynthOutput synth = synthesize_room_detailed(spec);
  const auto gt = anchored(synth.dataset.ground_truth);
  Layout layout = layout_from_model(synth.model);
  // Re-anchor the layout planes into the fragment-0 frame used by gt.
  const RigidTransform inv0 = synth.dataset.ground_truth[0].inverse();
  layout.base.plane = transform_plane(inv0, layout.base.plane);
  for (auto& w : layout.walls) w.plane = transform_plane(inv0, w.plane);

  std::vector<FragmentPair> pairs;
  for (int k = 0; k + 1 < int(gt.size()); ++k) {
    pairs.push_back({k, k + 1, gt[k].inverse() * gt[k + 1], {}});
  }
  pairs = establish_pair_correspondences(synth.dataset.fragments, gt, pairs, 0.1,
                                         30 * M_PI / 180);
  std::vector<std::vector<LayoutCorrespondence>> lc(gt.size());
  for (int f = 0; f < int(gt.size()); ++f) {
    lc[f] = establish_layout_correspondences(synth.dataset.fragments[f], f, gt[f], layout,
                                             0.1, 30 * M_PI / 180);
    EXPECT_FALSE(lc[f].empty());
  }
  const EnergyBreakdown e = energy(gt, synth.dataset.fragments, pairs, lc, 1.0, 1.0);
  EXPECT_LT(e.total, 1e-12);  // zero up to matrix-product roundoff

  // One fragment shifted 0.1 m along a wall normal with a single layout corr.
  std::vector<RigidTransform> poses(2);
  poses[1].translation = Vec3(0.1, 0, 0);
  Fragment still, moved;
  still.points.push_back({Vec3(0, 0, 0), Vec3::UnitX()});
  moved.points.push_back({Vec3(0, 0.5, 0.5), Vec3::UnitX()});
  std::vector<std::vector<LayoutCorrespondence>> single(2);
  single[1].push_back({1, 0, Vec3(0, 0.5, 0.5), Vec3::UnitX()});
  const EnergyBreakdown shifted = energy(poses, {still, moved}, {}, single, 1.0, 1.0);
  EXPECT_NEAR(shifted.e_layout, 0.01, 1e-15);
  EXPECT_NEAR(shifted.total, 0.01, 1e-15);

  // Pair term: identity poses with a unit-translation measurement.
  FragmentPair pair;
  pair.i = 0;
  pair.j = 1;
  pair.t_tilde.translation = Vec3(1, 0, 0);
  const EnergyBreakdown ep = energy({RigidTransform::Identity(), RigidTransform::Identity()},
                                    {still, moved}, {pair}, {{}, {}}, 1.0, 1.0);
  EXPECT_NEAR(ep.e_pair, 1.0, 1e-15);
  EXPECT_NEAR(ep.total, 1.0, 1e-15);

  // Breakdown invariant.
  const EnergyBreakdown mix = energy(poses, {still, moved}, {pair}, single, 0.7, 0.3);
  EXPECT_NEAR(mix.total, mix.e_layout + 0.7 * mix.e_frag + 0.3 * mix.e_pair, 1e-9);
}

TEST(GaussNewtonStep, StationaryAtGroundTruth) {
  const SyntheticRoomSpec spec = box_spec(120, 4, 5);
  const SynthOutput synth = synthesize_room_detailed(spec);
  const auto gt = anchored(synth.dataset.ground_truth);
  Layout layout = layout_from_model(synth.model);
  const RigidTransform inv0 = synth.dataset.ground_truth[0].inverse();
  layout.base.plane = transform_plane(inv0, layout.base.plane);
  for (auto& w : layout.walls) w.plane = transform_plane(inv0, w.plane);

  std::vector<FragmentPair> pairs;
  for (int k = 0; k + 1 < int(gt.size()); ++k) {
    pairs.push_back({k, k + 1, gt[k].inverse() * gt[k + 1], {}});
  }
  pairs = establish_pair_correspondences(synth.dataset.fragments, gt, pairs, 0.1,
                                         30 * M_PI / 180);
  std::vector<std::vector<LayoutCorrespondence>> lc(gt.size());
  for (int f = 0; f < int(gt.size()); ++f) {
    lc[f] = establish_layout_correspondences(synth.dataset.fragments[f], f, gt[f], layout,
                                             0.1, 30 * M_PI / 180);
  }
  const GaussNewtonResult r =
      gauss_newton_step(gt, synth.dataset.fragments, pairs, lc, 1.0, 0.01);
  EXPECT_LT(r.step_norm, 1e-9);
  EXPECT_LT(r.energy.total, 1e-15);
}

TEST(GaussNewtonStep, RestoresPerturbedFragment) {
  const SyntheticRoomSpec spec = box_spec(150, 4, 7);
  const SynthOutput synth = synthesize_room_detailed(spec);
  const auto gt = anchored(synth.dataset.ground_truth);
  Layout layout = layout_from_model(synth.model);
  const RigidTransform inv0 = synth.dataset.ground_truth[0].inverse();
  layout.base.plane = transform_plane(inv0, layout.base.plane);
  for (auto& w : layout.walls) w.plane = transform_plane(inv0, w.plane);

  // Perturb fragment 2 toward a wall; correspondences established at truth.
  std::vector<RigidTransform> poses = gt;
  Vec6 xi;
  xi << 0, 0, 0, 0.05, 0, 0;
  poses[2] = se3_exp(xi) * poses[2];

  std::vector<FragmentPair> pairs;
  for (int k = 0; k + 1 < int(gt.size()); ++k) {
    pairs.push_back({k, k + 1, gt[k].inverse() * gt[k + 1], {}});
  }
  pairs = establish_pair_correspondences(synth.dataset.fragments, gt, pairs, 0.1,
                                         30 * M_PI / 180);
  std::vector<std::vector<LayoutCorrespondence>> lc(gt.size());
  for (int f = 0; f < int(gt.size()); ++f) {
    lc[f] = establish_layout_correspondences(synth.dataset.fragments[f], f, gt[f], layout,
                                             0.1, 30 * M_PI / 180);
  }

  double prev = energy(poses, synth.dataset.fragments, pairs, lc, 1.0, 0.01).total;
  for (int step = 0; step < 10; ++step) {
    GaussNewtonResult r =
        gauss_newton_step(poses, synth.dataset.fragments, pairs, lc, 1.0, 0.01);
    EXPECT_LE(r.energy.total, prev + 1e-12);
    prev = r.energy.total;
    poses = std::move(r.poses);
  }
  EXPECT_LT((poses[2].translation - gt[2].translation).norm(), 1e-3);
}

TEST(GaussNewtonStep, LayoutOnlySolveOnThreeOrthogonalPlanes) {
  // Fragment 1 is constrained only by layout correspondences on three
  // orthogonal planes; lambda1 = lambda2 = 0.
  Layout layout;
  layout.base.plane = {Vec3::UnitZ(), 0.0};
  layout.base.world_points = {Vec3::Zero()};
  layout.base.inliers = {{0, 0}};
  for (const Vec3& n : {Vec3::UnitX(), Vec3::UnitY()}) {
    DominantPlane w;
    w.plane = {n, 0.0};
    w.world_points = {Vec3::Zero()};
    w.inliers = {{0, 0}};
    layout.walls.push_back(w);
  }

  std::mt19937_64 rng(709);
  std::uniform_real_distribution<double> u01(0, 1);
  Fragment anchor_frag;  // fragment 0, unused
  anchor_frag.points.push_back({Vec3(0, 0, 0), Vec3::UnitZ()});
  Fragment frag;
  for (int i = 0; i < 60; ++i) {
    frag.points.push_back({Vec3(u01(rng), u01(rng), 0.0), Vec3::UnitZ()});
    frag.points.push_back({Vec3(0.0, u01(rng), u01(rng)), Vec3::UnitX()});
    frag.points.push_back({Vec3(u01(rng), 0.0, u01(rng)), Vec3::UnitY()});
  }

  Vec6 xi;
  xi << 0.02, -0.03, 0.01, 0.04, 0.03, -0.05;
  std::vector<RigidTransform> poses(2);
  poses[1] = se3_exp(xi);  // true pose is identity

  std::vector<std::vector<LayoutCorrespondence>> lc(2);
  for (int p = 0; p < int(frag.points.size()); ++p) {
    // Virtual points on the true planes: project the true (identity-pose)
    // positions, which lie exactly on the planes.
    lc[1].push_back({1, p, frag.points[p].position, frag.points[p].normal});
  }
  std::vector<Fragment> fragments = {anchor_frag, frag};
  for (int step = 0; step < 12; ++step) {
    poses = gauss_newton_step(poses, fragments, {}, lc, 0.0, 0.0).poses;
  }
  EXPECT_LT(poses[1].translation.norm(), 1e-8);
  EXPECT_LT(so3_log(poses[1].rotation).norm(), 1e-8);
}

TEST(GaussNewtonStep, ThrowsWhenUnconstrained) {
  Fragment a, b;
  a.points.push_back({Vec3(0, 0, 0), Vec3::UnitZ()});
  b.points.push_back({Vec3(1, 0, 0), Vec3::UnitZ()});
  const std::vector<RigidTransform> poses(2);
  EXPECT_THROW(
      gauss_newton_step(poses, {a, b}, {}, {{}, {}}, 0.0, 0.0),
      SingularSystem);
}

TEST(JointOptimize, ZeroNoiseIsAFixedPoint) {
  const SyntheticRoomSpec spec = box_spec(200, 4, 9);
  const SynthOutput synth = synthesize_room_detailed(spec);
  const auto gt = anchored(synth.dataset.ground_truth);

  std::vector<FragmentPair> pairs;
  for (int k = 0; k + 1 < int(gt.size()); ++k) {
    pairs.push_back({k, k + 1, gt[k].inverse() * gt[k + 1], {}});
  }
  RegistrationConfig config;
  config.outer_iters = 4;
  LayoutEstimateParams lp;
  lp.selection.density_min = 1;
  const JointResult result =
      joint_optimize(synth.dataset.fragments, gt, pairs, config, {}, lp);

  ASSERT_TRUE(result.layout_found);
  ASSERT_TRUE(result.layout.has_value());
  EXPECT_EQ(result.layout->walls.size(), 4u);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    EXPECT_LT((result.poses[k].translation - gt[k].translation).norm(), 1e-6);
    EXPECT_LT((result.poses[k].rotation - gt[k].rotation).norm(), 1e-6);
  }
  for (const auto& inner : result.inner_energies) {
    for (std::size_t k = 1; k < inner.size(); ++k) {
      EXPECT_LE(inner[k], inner[k - 1] + 1e-12 * (1 + inner[k - 1]));
    }
  }
}

TEST(JointOptimize, FallsBackWhenNoLayoutExists) {
  // Noise balls have no planes at all: joint_optimize must flag the trace and
  // return the incoming poses untouched.
  std::mt19937_64 rng(711);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Fragment> fragments(2);
  for (int f = 0; f < 2; ++f) {
    fragments[f].id = f;
    for (int i = 0; i < 300; ++i) {
      fragments[f].points.push_back({Vec3(g(rng), g(rng), g(rng)), random_unit(rng)});
    }
  }
  std::vector<RigidTransform> init(2);
  init[1].translation = Vec3(0.1, 0, 0);
  std::vector<FragmentPair> pairs = {{0, 1, RigidTransform::Identity(), {}}};

  PlaneExtractParams extract;
  extract.energy.null_cost = 0.01;
  extract.energy.min_support = 100;
  const JointResult result = joint_optimize(fragments, init, pairs, {}, extract, {});
  EXPECT_FALSE(result.layout_found);
  EXPECT_FALSE(result.layout.has_value());
  EXPECT_EQ(result.poses[1].translation, init[1].translation);
}
