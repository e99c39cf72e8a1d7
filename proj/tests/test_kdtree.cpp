#include "recon/kdtree.hpp"

#include <gtest/gtest.h>

#include <random>

#include "testing_util.hpp"

using namespace recon;

namespace {

std::vector<Neighbor> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, int k) {
  std::vector<Neighbor> all;
  for (int i = 0; i < int(pts.size()); ++i) all.push_back({i, (pts[i] - q).squaredNorm()});
  std::sort(all.begin(), all.end(), neighbor_less);
  if (int(all.size()) > k) all.resize(k);
  return all;
}

std::vector<int> brute_radius(const std::vector<Vec3>& pts, const Vec3& q, double r) {
  std::vector<int> out;
  for (int i = 0; i < int(pts.size()); ++i) {
    if ((pts[i] - q).squaredNorm() <= r * r) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST(SpatialIndex, KnnMatchesBruteForce) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size_dist(1, 2000);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = size_dist(rng);
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(recon::testing::random_vec(rng, 4.0));
    SpatialIndex index(pts);
    for (int k : {1, 8, 16}) {
      for (int q = 0; q < 20; ++q) {
        const Vec3 query = recon::testing::random_vec(rng, 5.0);
        const auto got = index.knn(query, k);
        const auto want = brute_knn(pts, query, k);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          EXPECT_EQ(got[i].index, want[i].index);
          EXPECT_DOUBLE_EQ(got[i].dist2, want[i].dist2);
        }
      }
    }
  }
}

TEST(SpatialIndex, RadiusMatchesBruteForce) {
  std::mt19937_64 rng(103);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1500; ++i) pts.push_back(recon::testing::random_vec(rng, 2.0));
  SpatialIndex index(pts);
  for (double r : {0.0, 0.05, 0.3, 1.0, 10.0}) {
    for (int q = 0; q < 30; ++q) {
      const Vec3 query = recon::testing::random_vec(rng, 2.5);
      EXPECT_EQ(index.radius(query, r), brute_radius(pts, query, r));
    }
  }
}

TEST(SpatialIndex, DuplicatePointsTieBreakByIndex) {
  std::vector<Vec3> pts(10, Vec3(1, 1, 1));
  pts.push_back(Vec3(2, 2, 2));
  SpatialIndex index(pts);
  const auto got = index.knn(Vec3(1, 1, 1), 3);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].index, 0);
  EXPECT_EQ(got[1].index, 1);
  EXPECT_EQ(got[2].index, 2);
}

TEST(SpatialIndex, EdgeCases) {
  SpatialIndex empty;
  EXPECT_EQ(empty.knn(Vec3::Zero(), 5).size(), 0u);
  EXPECT_EQ(empty.nearest(Vec3::Zero()).index, -1);

  SpatialIndex one(std::vector<Vec3>{Vec3(1, 2, 3)});
  const auto n = one.nearest(Vec3::Zero());
  EXPECT_EQ(n.index, 0);
  EXPECT_DOUBLE_EQ(n.dist2, 14.0);
  EXPECT_EQ(one.knn(Vec3::Zero(), 10).size(), 1u);  // clipped to cloud size
  EXPECT_EQ(one.radius(Vec3(1, 2, 3), 0.0), std::vector<int>{0});
}

TEST(SpatialIndex, RadiusBoundaryInclusive) {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  SpatialIndex index(pts);
  const auto got = index.radius(Vec3::Zero(), 1.0);
  EXPECT_EQ(got, (std::vector<int>{0, 1}));
}
