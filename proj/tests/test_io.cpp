#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "recon/config.hpp"
#include "recon/dataset_io.hpp"
#include "recon/ply_io.hpp"
#include "recon/synth.hpp"
#include "recon/trajectory_io.hpp"
#include "testing_util.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

struct ScopedTempDir {
  fs::path path;
  ScopedTempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("recon_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~ScopedTempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

Fragment sample_fragment(int n = 50, unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  Fragment f;
  f.id = 7;
  f.sensor_origin = Vec3(0.25, -0.5, 1.5);
  for (int i = 0; i < n; ++i) {
    OrientedPoint p;
    p.position = recon::testing::random_vec(rng, 3.0);
    p.normal = recon::testing::random_unit(rng);
    f.points.push_back(p);
  }
  return f;
}

}  // namespace

TEST(PlyIo, AsciiRoundTripIsExact) {
  ScopedTempDir tmp;
  const Fragment f = sample_fragment();
  write_fragment(f, tmp.path / "f.ply");
  const Fragment g = read_fragment(tmp.path / "f.ply");
  ASSERT_EQ(g.points.size(), f.points.size());
  EXPECT_EQ(g.id, f.id);
  EXPECT_EQ(g.sensor_origin, f.sensor_origin);
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    EXPECT_EQ(g.points[i].position, f.points[i].position);
    EXPECT_LT((g.points[i].normal - f.points[i].normal).norm(), 1e-15);
  }
}

TEST(PlyIo, BinaryRoundTripIsExact) {
  ScopedTempDir tmp;
  const Fragment f = sample_fragment(200, 2);
  write_fragment(f, tmp.path / "f.ply", /*binary=*/true);
  const Fragment g = read_fragment(tmp.path / "f.ply");
  ASSERT_EQ(g.points.size(), f.points.size());
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    EXPECT_EQ(g.points[i].position, f.points[i].position);
  }
}

TEST(PlyIo, ReadsHandWrittenAsciiFile) {
  ScopedTempDir tmp;
  std::ofstream out(tmp.path / "three.ply");
  out << "ply\nformat ascii 1.0\nelement vertex 3\n"
         "property float x\nproperty float y\nproperty float z\n"
         "property float nx\nproperty float ny\nproperty float nz\n"
         "end_header\n"
         "0 0 0 0 0 2\n"  // normal gets normalized on load
         "1 0 0 0 1 0\n"
         "0 1 0 1 0 0\n";
  out.close();
  const Fragment f = read_fragment(tmp.path / "three.ply");
  ASSERT_EQ(f.points.size(), 3u);
  EXPECT_NEAR(f.points[0].normal.z(), 1.0, 1e-15);
}

TEST(PlyIo, ErrorCases) {
  ScopedTempDir tmp;
  {
    std::ofstream out(tmp.path / "empty.ply");
  }
  EXPECT_THROW(read_fragment(tmp.path / "empty.ply"), ParseError);

  {
    std::ofstream out(tmp.path / "no_normals.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\n"
           "property float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
  }
  EXPECT_THROW(read_fragment(tmp.path / "no_normals.ply"), MissingNormals);

  {
    std::ofstream out(tmp.path / "bad_line.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 2\n"
           "property float x\nproperty float y\nproperty float z\n"
           "property float nx\nproperty float ny\nproperty float nz\n"
           "end_header\n0 0 0 0 0 1\n0 0 garbage\n";
  }
  try {
    read_fragment(tmp.path / "bad_line.ply");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 12);  // second vertex line
  }

  EXPECT_THROW(read_fragment(tmp.path / "does_not_exist.ply"), IoError);
}

TEST(TrajectoryIo, RoundTripAndValidation) {
  ScopedTempDir tmp;
  std::mt19937_64 rng(5);
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 6; ++i) poses.push_back(recon::testing::random_transform(rng));
  write_trajectory(poses, tmp.path / "traj.txt");
  const auto back = read_trajectory(tmp.path / "traj.txt");
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(back[i].rotation, poses[i].rotation);
    EXPECT_EQ(back[i].translation, poses[i].translation);
  }

  {
    std::ofstream out(tmp.path / "bad.txt");
    out << "0 2 0 0 0 0 1 0 0 0 0 1 0\n";  // scaled rotation block
  }
  EXPECT_THROW(read_trajectory(tmp.path / "bad.txt"), ParseError);

  {
    std::ofstream out(tmp.path / "gap.txt");
    out << "1 1 0 0 0 0 1 0 0 0 0 1 0\n";
  }
  EXPECT_THROW(read_trajectory(tmp.path / "gap.txt"), ParseError);
}

TEST(DatasetIo, DirectoryRoundTrip) {
  ScopedTempDir tmp;
  SyntheticRoomSpec spec;
  spec.floor_polygon = {{0, 0}, {4, 0}, {4, 3}, {0, 3}};
  spec.points_per_m2 = 30;
  spec.fragment_count = 3;
  spec.seed = 9;
  const Dataset d = synthesize_room(spec);
  write_dataset(d, tmp.path / "data");
  const Dataset back = read_dataset(tmp.path / "data");
  ASSERT_EQ(back.fragments.size(), d.fragments.size());
  ASSERT_EQ(back.odometry.size(), d.odometry.size());
  ASSERT_EQ(back.ground_truth.size(), d.ground_truth.size());
  ASSERT_EQ(back.ground_truth_cloud.size(), d.ground_truth_cloud.size());
  for (std::size_t i = 0; i < d.fragments.size(); ++i) {
    ASSERT_EQ(back.fragments[i].points.size(), d.fragments[i].points.size());
    EXPECT_EQ(back.fragments[i].points[0].position, d.fragments[i].points[0].position);
  }
  EXPECT_THROW(read_dataset(tmp.path / "nope"), IoError);
}

TEST(Config, ParsesScalarsSectionsAndArrays) {
  const std::string text = R"(
# pipeline settings
[dataset]
path = "data/room"   # inline comment
[icp]
max_dist = 0.25
iterations = 40
refine = true
[synth]
polygon = [[0, 0], [4.5, 0], [4.5, 3], [0, 3]]
seed = 12345
)";
  const ConfigTree cfg = ConfigTree::parse_string(text, "test");
  EXPECT_EQ(cfg.get_string("dataset.path", ""), "data/room");
  EXPECT_DOUBLE_EQ(cfg.get_double("icp.max_dist", 0), 0.25);
  EXPECT_EQ(cfg.get_int("icp.iterations", 0), 40);
  EXPECT_TRUE(cfg.get_bool("icp.refine", false));
  EXPECT_EQ(cfg.get_u64("synth.seed", 0), 12345u);
  EXPECT_DOUBLE_EQ(cfg.get_double("missing.key", 7.5), 7.5);

  const auto& poly = cfg.get("synth.polygon").as_array("synth.polygon");
  ASSERT_EQ(poly.size(), 4u);
  EXPECT_DOUBLE_EQ(poly[1].as_array("")[0].as_number(""), 4.5);
}

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_THROW(ConfigTree::parse_string("key value\n", "t"), ConfigError);
  EXPECT_THROW(ConfigTree::parse_string("[unterminated\n", "t"), ConfigError);
  EXPECT_THROW(ConfigTree::parse_string("k = [1, 2\n", "t"), ConfigError);
  EXPECT_THROW(ConfigTree::parse_string("k = \"open\n", "t"), ConfigError);
  EXPECT_THROW(ConfigTree::parse_string("k = nonsense\n", "t"), ConfigError);
  EXPECT_THROW(ConfigTree::parse_file("/does/not/exist.toml"), ConfigError);

  const ConfigTree cfg = ConfigTree::parse_string("k = 1\n", "t");
  EXPECT_THROW(cfg.get_string("k", ""), ConfigError);
  EXPECT_THROW(cfg.get("absent"), ConfigError);
}
