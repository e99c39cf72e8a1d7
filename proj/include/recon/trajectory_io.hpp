// Trajectory files: one line per pose, "id r00 r01 r02 tx r10 r11 r12 ty
// r20 r21 r22 tz" (row-major 3x4). Also used for consecutive-pair odometry,
// where line i stores the transform from frame i+1 into frame i.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "recon/error.hpp"
#include "recon/geometry.hpp"
#include "recon/ply_io.hpp"  // format_double

namespace recon {

inline void write_trajectory(const std::vector<RigidTransform>& poses,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto m = poses[i].matrix34();
    out << i;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) out << " " << format_double(m(r, c));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<RigidTransform> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::string fname = path.string();
  std::vector<RigidTransform> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long id;
    double v[12];
    if (!(ls >> id)) throw ParseError(fname, line_no, "missing pose id");
    for (int k = 0; k < 12; ++k) {
      if (!(ls >> v[k])) throw ParseError(fname, line_no, "expected 12 matrix entries");
    }
    if (id != long(poses.size())) {
      throw ParseError(fname, line_no, "pose ids must be consecutive from 0, got " +
                                           std::to_string(id));
    }
    RigidTransform t;
    t.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    t.translation = Vec3(v[3], v[7], v[11]);
    if (!t.is_valid(1e-6)) {
      throw ParseError(fname, line_no, "rotation block is not a proper rotation");
    }
    poses.push_back(t);
  }
  return poses;
}

}  // namespace recon
