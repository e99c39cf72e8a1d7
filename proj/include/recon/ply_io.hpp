// PLY point-file reader/writer for fragments and point clouds. Supports
// ascii and binary_little_endian with x y z nx ny nz vertex properties;
// the sensor origin and fragment id travel in comment lines.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"

namespace recon {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_fragment(const Fragment& fragment, const std::filesystem::path& path,
                           bool binary = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "comment fragment_id " << fragment.id << "\n";
  out << "comment sensor_origin " << format_double(fragment.sensor_origin.x()) << " "
      << format_double(fragment.sensor_origin.y()) << " "
      << format_double(fragment.sensor_origin.z()) << "\n";
  out << "element vertex " << fragment.points.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz"}) {
    out << "property double " << name << "\n";
  }
  out << "end_header\n";
  if (binary) {
    for (const auto& p : fragment.points) {
      double row[6] = {p.position.x(), p.position.y(), p.position.z(),
                       p.normal.x(),   p.normal.y(),   p.normal.z()};
      out.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
  } else {
    for (const auto& p : fragment.points) {
      out << format_double(p.position.x()) << " " << format_double(p.position.y()) << " "
          << format_double(p.position.z()) << " " << format_double(p.normal.x()) << " "
          << format_double(p.normal.y()) << " " << format_double(p.normal.z()) << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_cloud(const std::vector<OrientedPoint>& points,
                        const std::filesystem::path& path, bool binary = false) {
  Fragment f;
  f.points = points;
  write_fragment(f, path, binary);
}

namespace detail {

struct PlyProperty {
  std::string name;
  int byte_size = 8;   // 4 for float, 8 for double
  bool is_float = false;
};

}  // namespace detail

inline Fragment read_fragment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::string fname = path.string();

  int line_no = 0;
  auto next_line = [&](std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  std::string line;
  if (!next_line(line)) throw ParseError(fname, 1, "empty file");
  if (line != "ply") throw ParseError(fname, line_no, "not a ply file (missing 'ply' magic)");

  Fragment fragment;
  bool binary = false;
  bool saw_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex_element = false;
  std::vector<detail::PlyProperty> props;

  while (true) {
    if (!next_line(line)) throw ParseError(fname, line_no, "unexpected end of header");
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "end_header") break;
    if (tok == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw ParseError(fname, line_no, "unsupported ply format: " + fmt);
      }
      saw_format = true;
    } else if (tok == "comment") {
      std::string key;
      ls >> key;
      if (key == "sensor_origin") {
        double x, y, z;
        if (!(ls >> x >> y >> z)) {
          throw ParseError(fname, line_no, "malformed sensor_origin comment");
        }
        fragment.sensor_origin = Vec3(x, y, z);
      } else if (key == "fragment_id") {
        ls >> fragment.id;
      }
    } else if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (tok == "property") {
      if (!in_vertex_element) continue;  // properties of other elements are skipped
      std::string type, name;
      ls >> type >> name;
      detail::PlyProperty p;
      p.name = name;
      if (type == "float" || type == "float32") {
        p.byte_size = 4;
        p.is_float = true;
      } else if (type == "double" || type == "float64") {
        p.byte_size = 8;
      } else {
        throw ParseError(fname, line_no, "unsupported vertex property type: " + type);
      }
      props.push_back(p);
    }
  }
  if (!saw_format) throw ParseError(fname, line_no, "header has no format line");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (int i = 0; i < int(props.size()); ++i) {
    const std::string& n = props[i].name;
    if (n == "x") ix = i;
    if (n == "y") iy = i;
    if (n == "z") iz = i;
    if (n == "nx") inx = i;
    if (n == "ny") iny = i;
    if (n == "nz") inz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw ParseError(fname, line_no, "vertex element lacks x/y/z properties");
  }
  if (inx < 0 || iny < 0 || inz < 0) {
    throw MissingNormals(fname + ": vertex element lacks nx/ny/nz normal properties");
  }

  fragment.points.reserve(vertex_count);
  std::vector<double> row(props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (binary) {
      for (std::size_t c = 0; c < props.size(); ++c) {
        char buf[8];
        if (!in.read(buf, props[c].byte_size)) {
          throw ParseError(fname, line_no, "binary payload truncated at vertex " +
                                               std::to_string(v));
        }
        if (props[c].is_float) {
          float f;
          std::memcpy(&f, buf, 4);
          row[c] = double(f);
        } else {
          std::memcpy(&row[c], buf, 8);
        }
      }
    } else {
      if (!next_line(line)) {
        throw ParseError(fname, line_no, "expected " + std::to_string(vertex_count) +
                                             " vertices, file ends at " + std::to_string(v));
      }
      std::istringstream ls(line);
      for (std::size_t c = 0; c < props.size(); ++c) {
        if (!(ls >> row[c])) {
          throw ParseError(fname, line_no, "malformed vertex line");
        }
      }
    }
    OrientedPoint p;
    p.position = Vec3(row[ix], row[iy], row[iz]);
    p.normal = Vec3(row[inx], row[iny], row[inz]);
    const double n = p.normal.norm();
    if (!(n > 1e-12) || !p.position.allFinite()) {
      throw ParseError(fname, binary ? 0 : line_no,
                       "invalid point or zero normal at vertex " + std::to_string(v));
    }
    p.normal /= n;
    fragment.points.push_back(p);
  }
  return fragment;
}

}  // namespace recon
