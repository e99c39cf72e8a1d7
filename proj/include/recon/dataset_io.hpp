// Dataset directory layout:
//   fragments/fragment_0000.ply ...
//   odometry.txt            line i: transform mapping frame i+1 into frame i
//   gt_trajectory.txt       optional absolute ground-truth poses
//   gt_cloud.ply            optional noise-free reference cloud

#pragma once

#include <algorithm>
#include <filesystem>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/ply_io.hpp"
#include "recon/trajectory_io.hpp"

namespace recon {

inline void write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                          bool binary = false) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "fragments", ec);
  if (ec) throw IoError("cannot create dataset directory: " + dir.string());

  for (const Fragment& f : dataset.fragments) {
    char name[32];
    std::snprintf(name, sizeof(name), "fragment_%04d.ply", f.id);
    write_fragment(f, dir / "fragments" / name, binary);
  }
  write_trajectory(dataset.odometry, dir / "odometry.txt");
  if (!dataset.ground_truth.empty()) {
    write_trajectory(dataset.ground_truth, dir / "gt_trajectory.txt");
  }
  if (!dataset.ground_truth_cloud.empty()) {
    write_cloud(dataset.ground_truth_cloud, dir / "gt_cloud.ply", binary);
  }
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path frag_dir = dir / "fragments";
  if (!fs::is_directory(frag_dir)) {
    throw IoError("dataset has no fragments/ directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(frag_dir)) {
    if (entry.path().extension() == ".ply") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("dataset has no fragment files: " + dir.string());

  Dataset dataset;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Fragment f = read_fragment(files[i]);
    f.id = int(i);
    dataset.fragments.push_back(std::move(f));
  }
  dataset.odometry = read_trajectory(dir / "odometry.txt");
  if (dataset.odometry.size() + 1 != dataset.fragments.size()) {
    throw IoError("odometry.txt must have one line per consecutive fragment pair");
  }
  if (fs::exists(dir / "gt_trajectory.txt")) {
    dataset.ground_truth = read_trajectory(dir / "gt_trajectory.txt");
    if (dataset.ground_truth.size() != dataset.fragments.size()) {
      throw IoError("gt_trajectory.txt must have one pose per fragment");
    }
  }
  if (fs::exists(dir / "gt_cloud.ply")) {
    dataset.ground_truth_cloud = read_fragment(dir / "gt_cloud.ply").points;
  }
  return dataset;
}

}  // namespace recon
