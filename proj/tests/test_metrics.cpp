#include "recon/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "testing_util.hpp"

using namespace recon;
using namespace recon::testing;

namespace {

std::vector<Vec3> dense_plane(int n, double spacing, double z) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) pts.emplace_back(i * spacing, j * spacing, z);
  }
  return pts;
}

}  // namespace

TEST(ReconstructionError, IdenticalCloudsAreZero) {
  const auto cloud = dense_plane(20, 0.05, 0.0);
  const ReconstructionError e = reconstruction_error(cloud, cloud);
  EXPECT_DOUBLE_EQ(e.average, 0.0);
  EXPECT_DOUBLE_EQ(e.median, 0.0);
}

TEST(ReconstructionError, NormalOffsetIsExactlyTheGap) {
  const auto gt = dense_plane(25, 0.05, 0.0);
  std::vector<Vec3> est = gt;
  for (auto& p : est) p.z() += 0.01;  // offset along the plane normal
  const ReconstructionError e = reconstruction_error(est, gt);
  EXPECT_NEAR(e.average, 0.01, 1e-12);
  EXPECT_LE(e.average, 0.01 + 1e-12);
  EXPECT_NEAR(e.median, 0.01, 1e-12);
}

TEST(ReconstructionError, MonotoneUnderAddedNoise) {
  std::mt19937_64 rng(801);
  const auto gt = dense_plane(40, 0.05, 0.0);
  double previous = 0.0;
  for (double sigma : {0.005, 0.02}) {
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<Vec3> est = gt;
    for (auto& p : est) p += Vec3(g(rng), g(rng), g(rng));
    const double avg = reconstruction_error(est, gt).average;
    EXPECT_GT(avg, previous);
    previous = avg;
  }
}

TEST(ReconstructionError, EmptyCloudThrows) {
  const std::vector<Vec3> cloud = {Vec3::Zero()};
  EXPECT_THROW(reconstruction_error({}, cloud), EmptyCloud);
  EXPECT_THROW(reconstruction_error(cloud, {}), EmptyCloud);
}

TEST(TrajectoryError, IdenticalTrajectoriesAreZero) {
  std::mt19937_64 rng(803);
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 7; ++i) poses.push_back(random_transform(rng));
  const TrajectoryError e = trajectory_error(poses, poses);
  EXPECT_DOUBLE_EQ(e.rmse, 0.0);
  EXPECT_DOUBLE_EQ(e.median, 0.0);
}

TEST(TrajectoryError, KnownOffsetsArithmetic) {
  // Anchored comparison with per-pose offsets {0, 0.03, 0.04}.
  std::vector<RigidTransform> gt(3), est(3);
  gt[1].translation = Vec3(1, 0, 0);
  gt[2].translation = Vec3(2, 0, 0);
  est[1].translation = Vec3(1, 0.03, 0);
  est[2].translation = Vec3(2, 0, 0.04);
  const TrajectoryError e = trajectory_error(est, gt);
  EXPECT_NEAR(e.rmse, std::sqrt((0.0 + 9e-4 + 16e-4) / 3.0), 1e-12);
  EXPECT_NEAR(e.median, 0.03, 1e-12);
}

TEST(TrajectoryError, AnchoringRemovesACommonOffset) {
  std::mt19937_64 rng(805);
  std::vector<RigidTransform> gt;
  for (int i = 0; i < 6; ++i) gt.push_back(random_transform(rng));
  const RigidTransform shift = random_transform(rng);
  std::vector<RigidTransform> est;
  for (const auto& p : gt) est.push_back(shift * p);
  const TrajectoryError e = trajectory_error(est, gt);
  EXPECT_LT(e.rmse, 1e-12);
}

TEST(TrajectoryError, BestFitAlignmentHandlesArbitraryFrames) {
  std::mt19937_64 rng(807);
  std::vector<RigidTransform> gt;
  for (int i = 0; i < 8; ++i) gt.push_back(random_transform(rng, 2.0, 3.0));
  const RigidTransform shift = random_transform(rng);
  std::vector<RigidTransform> est;
  for (const auto& p : gt) est.push_back(shift * p);
  const TrajectoryError e =
      trajectory_error(est, gt, TrajectoryAlignment::kBestFit);
  EXPECT_LT(e.rmse, 1e-9);
}

TEST(TrajectoryError, LengthMismatchThrows) {
  std::vector<RigidTransform> a(3), b(4);
  EXPECT_THROW(trajectory_error(a, b), LengthMismatch);
  EXPECT_THROW(trajectory_error({}, {}), LengthMismatch);
}
