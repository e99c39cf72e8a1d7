// Integration tests that drive the installed CLI binary end to end.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "recon/dataset_io.hpp"
#include "recon/layout_io.hpp"
#include "recon/trajectory_io.hpp"

using namespace recon;
namespace fs = std::filesystem;

#ifndef RECON_CLI_PATH
#error "RECON_CLI_PATH must point at the reconstruct binary"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RECON_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CliFixture : ::testing::Test {
  fs::path tmp;

  void SetUp() override {
    tmp = fs::temp_directory_path() / "recon_cli_test";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    std::ofstream cfg(tmp / "room.toml");
    cfg << "[dataset]\n"
        << "path = \"" << (tmp / "data").string() << "\"\n"
        << "out = \"" << (tmp / "out").string() << "\"\n"
        << "[planes]\n"
        << "min_support = 40\n"
        << "[layout]\n"
        << "density_min = 2\n"
        << "[synth]\n"
        << "polygon = [[0,0],[4,0],[4,3],[0,3]]\n"
        << "points_per_m2 = 130\n"
        << "noise_sigma = 0.004\n"
        << "fragment_count = 5\n"
        << "drift_trans_sigma = 0.012\n"
        << "drift_rot_sigma_deg = 0.3\n"
        << "seed = 7\n";
  }

  void TearDown() override {
    std::error_code ec;
    fs::remove_all(tmp, ec);
  }

  std::string config() const { return (tmp / "room.toml").string(); }
};

}  // namespace

TEST_F(CliFixture, SynthRunEvalLayoutEndToEnd) {
  // synth: dataset files written and re-loadable.
  ASSERT_EQ(run_cli("synth --config " + config()), 0);
  const Dataset dataset = read_dataset(tmp / "data");
  EXPECT_EQ(dataset.fragments.size(), 5u);
  EXPECT_TRUE(dataset.has_ground_truth());

  // run: exit 0 and all artifacts present.
  ASSERT_EQ(run_cli("run --config " + config()), 0);
  for (const char* name :
       {"trajectory.txt", "layout.txt", "merged_cloud.ply", "trace.txt", "metrics.txt"}) {
    EXPECT_TRUE(fs::exists(tmp / "out" / name)) << name;
  }
  const auto poses = read_trajectory(tmp / "out" / "trajectory.txt");
  EXPECT_EQ(poses.size(), 5u);
  const LayoutFile layout = read_layout(tmp / "out" / "layout.txt");
  EXPECT_GE(layout.planes.size(), 5u);  // base + 4 walls

  // eval: reads the dataset ground truth and the estimated trajectory.
  EXPECT_EQ(run_cli("eval --dataset " + (tmp / "data").string() + " --trajectory " +
                    (tmp / "out" / "trajectory.txt").string()),
            0);

  // layout-only mode from the estimated trajectory.
  EXPECT_EQ(run_cli("layout --dataset " + (tmp / "data").string() + " --trajectory " +
                    (tmp / "out" / "trajectory.txt").string() + " --out " +
                    (tmp / "layout_only").string() + " --config " + config() +
                    " --grid-dump --labels-dump"),
            0);
  EXPECT_TRUE(fs::exists(tmp / "layout_only" / "layout.txt"));
  EXPECT_TRUE(fs::exists(tmp / "layout_only" / "grid.pgm"));
  EXPECT_TRUE(fs::exists(tmp / "layout_only" / "labels_0000.txt"));

  // no-layout mode still runs and writes a trajectory.
  ASSERT_EQ(run_cli("run --config " + config() + " --no-layout --out " +
                    (tmp / "out_nolayout").string()),
            0);
  EXPECT_TRUE(fs::exists(tmp / "out_nolayout" / "trajectory.txt"));
  EXPECT_FALSE(fs::exists(tmp / "out_nolayout" / "layout.txt"));
}

TEST_F(CliFixture, ErrorCategoriesMapToExitCodes) {
  // Missing dataset directory: io error.
  std::ofstream cfg(tmp / "missing.toml");
  cfg << "[dataset]\npath = \"" << (tmp / "nope").string() << "\"\n";
  cfg.close();
  EXPECT_EQ(run_cli("run --config " + (tmp / "missing.toml").string()), 3);

  // Malformed config: config error.
  std::ofstream bad(tmp / "bad.toml");
  bad << "this is not a config\n";
  bad.close();
  EXPECT_EQ(run_cli("run --config " + (tmp / "bad.toml").string()), 2);

  // Unknown flags: config error.
  EXPECT_EQ(run_cli("run --definitely-not-a-flag"), 2);

  // Missing required subcommand: config error.
  EXPECT_EQ(run_cli(""), 2);

  // eval on a dataset without ground truth: io error.
  Dataset plain;
  Fragment f;
  f.points.push_back({Vec3(0, 0, 0), Vec3::UnitZ()});
  f.points.push_back({Vec3(1, 0, 0), Vec3::UnitZ()});
  plain.fragments = {f, f};
  plain.odometry = {RigidTransform::Identity()};
  write_dataset(plain, tmp / "plain");
  write_trajectory({RigidTransform::Identity(), RigidTransform::Identity()},
                   tmp / "traj.txt");
  EXPECT_EQ(run_cli("eval --dataset " + (tmp / "plain").string() + " --trajectory " +
                    (tmp / "traj.txt").string()),
            3);
}
