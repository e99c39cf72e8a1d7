// Layout files: one line per plane, "role nx ny nz offset", role in
// {base, wall}. A second base line, when present, is the co-base plane.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "recon/error.hpp"
#include "recon/layout.hpp"
#include "recon/ply_io.hpp"  // format_double

namespace recon {

struct LayoutFile {
  std::vector<std::pair<std::string, PlaneHypothesis>> planes;  // role, plane
};

inline void write_layout_file(const LayoutFile& lf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& [role, p] : lf.planes) {
    out << role << " " << format_double(p.normal.x()) << " " << format_double(p.normal.y())
        << " " << format_double(p.normal.z()) << " " << format_double(p.offset) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_layout(const Layout& layout, const std::filesystem::path& path) {
  LayoutFile lf;
  lf.planes.emplace_back("base", layout.base.plane);
  if (layout.co_base) lf.planes.emplace_back("base", layout.co_base->plane);
  for (const auto& w : layout.walls) lf.planes.emplace_back("wall", w.plane);
  write_layout_file(lf, path);
}

inline LayoutFile read_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  LayoutFile lf;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string role;
    PlaneHypothesis p;
    if (!(ls >> role >> p.normal.x() >> p.normal.y() >> p.normal.z() >> p.offset)) {
      throw ParseError(path.string(), line_no, "expected 'role nx ny nz offset'");
    }
    if (role != "base" && role != "wall") {
      throw ParseError(path.string(), line_no, "unknown plane role: " + role);
    }
    lf.planes.emplace_back(role, p);
  }
  return lf;
}

// Debug dump of an occupancy grid as a portable graymap.
inline void write_grid_pgm(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P2\n" << grid.width << " " << grid.height << "\n255\n";
  for (int iy = grid.height - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      out << (grid.occupied(ix, iy) ? 255 : 0) << (ix + 1 == grid.width ? "\n" : " ");
    }
  }
}

}  // namespace recon
