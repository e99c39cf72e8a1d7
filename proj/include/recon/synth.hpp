// Synthetic indoor scan generator. Builds a polygonal room (floor, ceiling,
// one wall per polygon edge, optional clutter boxes), samples each surface
// from a loop of outward-facing viewpoints, and emits fragments in local
// coordinates together with ground truth and drifted odometry.
//
// Randomness is split into two independent engines so tests can reproduce
// the drift sequence without replaying the geometry draws:
//   geometry engine: seed ^ kGeometrySalt
//   drift engine:    seed ^ kDriftSalt, 6 normal draws per odometry step in
//                    the order wx wy wz vx vy vz.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"

namespace recon {

constexpr std::uint64_t kGeometrySalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kDriftSalt = 0xd1b54a32d192ed03ull;

struct ClutterBox {
  Vec3 min_corner = Vec3::Zero();
  Vec3 size = Vec3::Ones();
};

struct SyntheticRoomSpec {
  std::vector<Eigen::Vector2d> floor_polygon;  // simple polygon, meters
  double height = 2.5;
  std::vector<ClutterBox> clutter;
  double points_per_m2 = 300.0;  // per-fragment sampling density on visible surfaces
  double noise_sigma = 0.0;      // isotropic position noise, clipped at 3 sigma
  int fragment_count = 8;
  double drift_rot_sigma = 0.0;    // radians per odometry step
  double drift_trans_sigma = 0.0;  // meters per odometry step
  std::uint64_t seed = 0;
  // Fraction of a view sector shared between consecutive fragments. The last
  // and first fragments share the same fraction, closing the loop. The
  // default keeps the measured point overlap of consecutive pairs above 40%.
  double view_overlap = 0.5;
};

// Envelope planes of the generating room, interior-facing normals.
// Index 0 = floor, 1 = ceiling, 2.. = walls (one per polygon edge).
struct RoomModel {
  std::vector<PlaneHypothesis> envelope;
  static constexpr int kFloor = 0;
  static constexpr int kCeiling = 1;
  static constexpr int kFirstWall = 2;
  int wall_count() const { return int(envelope.size()) - 2; }
};

struct SynthOutput {
  Dataset dataset;
  RoomModel model;
  // surface_ids[f][k]: generating envelope plane of dataset.fragments[f].points[k],
  // or -1 for clutter points.
  std::vector<std::vector<int>> surface_ids;
  std::vector<int> ground_truth_surface_ids;
};

namespace poly {

inline double area(const std::vector<Eigen::Vector2d>& p) {
  double a = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

inline Eigen::Vector2d centroid(const std::vector<Eigen::Vector2d>& p) {
  double a = 0;
  Eigen::Vector2d c(0, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    const double w = u.x() * v.y() - v.x() * u.y();
    a += w;
    c += w * (u + v);
  }
  return c / (3.0 * a);
}

inline bool contains(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& q) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

inline bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                               const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline bool is_simple(const std::vector<Eigen::Vector2d>& p) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip shared-vertex (adjacent) edge pairs.
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
    }
  }
  return true;
}

inline double min_distance_to_edges(const std::vector<Eigen::Vector2d>& p,
                                    const Eigen::Vector2d& q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::Vector2d a = p[i], b = p[(i + 1) % p.size()];
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((q - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (a + t * ab - q).norm());
  }
  return best;
}

}  // namespace poly

inline void validate_spec(const SyntheticRoomSpec& spec) {
  if (spec.floor_polygon.size() < 3 || !poly::is_simple(spec.floor_polygon)) {
    throw InvalidSpec("floor_polygon must be a simple polygon with >= 3 vertices");
  }
  if (!(spec.height > 0)) throw InvalidSpec("height must be positive");
  if (spec.fragment_count < 2) throw InvalidSpec("fragment_count must be >= 2");
  if (!(spec.points_per_m2 > 0)) throw InvalidSpec("points_per_m2 must be positive");
  if (!(spec.view_overlap >= 0.0 && spec.view_overlap < 0.95)) {
    throw InvalidSpec("view_overlap must lie in [0, 0.95)");
  }
  if (spec.noise_sigma < 0 || spec.drift_rot_sigma < 0 || spec.drift_trans_sigma < 0) {
    throw InvalidSpec("noise and drift sigmas must be non-negative");
  }
}

inline RoomModel room_model(const SyntheticRoomSpec& spec) {
  validate_spec(spec);
  RoomModel model;
  model.envelope.push_back(PlaneHypothesis{Vec3::UnitZ(), 0.0});                 // floor
  model.envelope.push_back(PlaneHypothesis{-Vec3::UnitZ(), spec.height});       // ceiling
  const auto& pg = spec.floor_polygon;
  for (std::size_t i = 0; i < pg.size(); ++i) {
    const Eigen::Vector2d a = pg[i], b = pg[(i + 1) % pg.size()];
    const Eigen::Vector2d e = (b - a).normalized();
    Eigen::Vector2d n2(-e.y(), e.x());
    const Eigen::Vector2d mid = 0.5 * (a + b);
    if (!poly::contains(pg, mid + 1e-6 * n2)) n2 = -n2;  // interior-facing
    const Vec3 n(n2.x(), n2.y(), 0.0);
    model.envelope.push_back(PlaneHypothesis{n, -n.dot(Vec3(a.x(), a.y(), 0.0))});
  }
  return model;
}

namespace detail {

struct Face {
  Vec3 origin;            // a corner of the rectangle (rect faces only)
  Vec3 u_dir, v_dir;      // unit in-face axes
  double u_len = 0, v_len = 0;
  Vec3 normal;            // interior/outward facing
  int surface_id = -1;    // envelope plane index, or -1 for clutter
  bool is_polygon = false;  // floor/ceiling: sample the polygon footprint instead
  double z = 0;             // polygon faces: plane height
  double area = 0;
};

inline std::vector<Face> build_faces(const SyntheticRoomSpec& spec, const RoomModel& model) {
  std::vector<Face> faces;
  const auto& pg = spec.floor_polygon;
  const double poly_area = std::abs(poly::area(pg));

  Face floor;
  floor.is_polygon = true;
  floor.z = 0;
  floor.normal = model.envelope[RoomModel::kFloor].normal;
  floor.surface_id = RoomModel::kFloor;
  floor.area = poly_area;
  faces.push_back(floor);

  Face ceiling = floor;
  ceiling.z = spec.height;
  ceiling.normal = model.envelope[RoomModel::kCeiling].normal;
  ceiling.surface_id = RoomModel::kCeiling;
  faces.push_back(ceiling);

  for (std::size_t i = 0; i < pg.size(); ++i) {
    const Eigen::Vector2d a = pg[i], b = pg[(i + 1) % pg.size()];
    Face w;
    w.origin = Vec3(a.x(), a.y(), 0.0);
    w.u_dir = (Vec3(b.x(), b.y(), 0.0) - w.origin).normalized();
    w.u_len = (b - a).norm();
    w.v_dir = Vec3::UnitZ();
    w.v_len = spec.height;
    w.surface_id = RoomModel::kFirstWall + int(i);
    w.normal = model.envelope[w.surface_id].normal;
    w.area = w.u_len * w.v_len;
    faces.push_back(w);
  }

  for (const ClutterBox& box : spec.clutter) {
    const Vec3 lo = box.min_corner, sz = box.size;
    auto add_rect = [&](const Vec3& origin, const Vec3& u, double ul, const Vec3& v,
                        double vl, const Vec3& n) {
      if (ul <= 0 || vl <= 0) return;
      Face f;
      f.origin = origin;
      f.u_dir = u;
      f.u_len = ul;
      f.v_dir = v;
      f.v_len = vl;
      f.normal = n;
      f.surface_id = -1;
      f.area = ul * vl;
      faces.push_back(f);
    };
    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
    // side faces
    add_rect(lo, ey, sz.y(), ez, sz.z(), -ex);
    add_rect(lo + sz.x() * ex, ey, sz.y(), ez, sz.z(), ex);
    add_rect(lo, ex, sz.x(), ez, sz.z(), -ey);
    add_rect(lo + sz.y() * ey, ex, sz.x(), ez, sz.z(), ey);
    // top, and bottom only when the box floats above the floor
    add_rect(lo + sz.z() * ez, ex, sz.x(), ey, sz.y(), ez);
    if (lo.z() > 1e-9) add_rect(lo, ex, sz.x(), ey, sz.y(), -ez);
  }
  return faces;
}

inline Vec3 sample_face(const Face& face, const std::vector<Eigen::Vector2d>& pg,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (face.is_polygon) {
    Eigen::Vector2d lo = pg[0], hi = pg[0];
    for (const auto& v : pg) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    for (int tries = 0; tries < 4096; ++tries) {
      const Eigen::Vector2d q(lo.x() + uni(rng) * (hi.x() - lo.x()),
                              lo.y() + uni(rng) * (hi.y() - lo.y()));
      if (poly::contains(pg, q)) return Vec3(q.x(), q.y(), face.z);
    }
    throw InvalidSpec("degenerate floor polygon: rejection sampling failed");
  }
  return face.origin + uni(rng) * face.u_len * face.u_dir +
         uni(rng) * face.v_len * face.v_dir;
}

// Gaussian 3-vector with norm clipped at 3 sigma by redrawing.
inline Vec3 clipped_noise(double sigma, std::mt19937_64& rng) {
  if (sigma <= 0) return Vec3::Zero();
  std::normal_distribution<double> g(0.0, sigma);
  for (;;) {
    const Vec3 n(g(rng), g(rng), g(rng));
    if (n.norm() <= 3.0 * sigma) return n;
  }
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace detail

// Ground-truth camera poses: a loop inside the room at fixed height, facing
// outward, one pose per fragment.
inline std::vector<RigidTransform> synth_camera_path(const SyntheticRoomSpec& spec) {
  const Eigen::Vector2d c = poly::centroid(spec.floor_polygon);
  const double reach = poly::min_distance_to_edges(spec.floor_polygon, c);
  const double radius = 0.4 * reach;
  const double cam_h = std::min(1.5, 0.6 * spec.height);
  std::vector<RigidTransform> poses;
  for (int k = 0; k < spec.fragment_count; ++k) {
    const double phi = 2.0 * M_PI * k / spec.fragment_count;
    const Vec3 outward(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 tangent(-std::sin(phi), std::cos(phi), 0.0);
    RigidTransform t;
    t.rotation.col(0) = tangent;
    t.rotation.col(1) = Vec3::UnitZ();
    t.rotation.col(2) = outward;
    t.translation = Vec3(c.x(), c.y(), 0.0) + radius * outward + cam_h * Vec3::UnitZ();
    poses.push_back(t);
  }
  return poses;
}

inline SynthOutput synthesize_room_detailed(const SyntheticRoomSpec& spec) {
  validate_spec(spec);
  SynthOutput out;
  out.model = room_model(spec);
  const auto faces = detail::build_faces(spec, out.model);
  const auto gt_poses = synth_camera_path(spec);
  const Eigen::Vector2d room_center = poly::centroid(spec.floor_polygon);

  std::mt19937_64 geom_rng(spec.seed ^ kGeometrySalt);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const double normal_sigma = std::min(0.15, 10.0 * spec.noise_sigma);

  const int n = spec.fragment_count;
  const double sector_step = 2.0 * M_PI / n;
  const double sector_width = sector_step / (1.0 - spec.view_overlap);

  out.dataset.fragments.resize(n);
  out.surface_ids.resize(n);
  for (int k = 0; k < n; ++k) {
    Fragment& frag = out.dataset.fragments[k];
    frag.id = k;
    const RigidTransform inv_pose = gt_poses[k].inverse();
    frag.sensor_origin = Vec3::Zero();  // camera sits at the local origin
    const double phi_k = 2.0 * M_PI * k / n;

    for (const auto& face : faces) {
      const long count = std::lround(face.area * spec.points_per_m2);
      for (long s = 0; s < count; ++s) {
        const Vec3 p_world = detail::sample_face(face, spec.floor_polygon, geom_rng);
        const double az = std::atan2(p_world.y() - room_center.y(),
                                     p_world.x() - room_center.x());
        if (std::abs(detail::wrap_angle(az - phi_k)) > 0.5 * sector_width) continue;

        Vec3 p = p_world + detail::clipped_noise(spec.noise_sigma, geom_rng);
        Vec3 nrm = face.normal;
        if (normal_sigma > 0) {
          const auto [t1, t2] = orthonormal_basis(face.normal);
          nrm = (face.normal + normal_sigma * unit_normal(geom_rng) * t1 +
                 normal_sigma * unit_normal(geom_rng) * t2)
                    .normalized();
        }
        OrientedPoint op;
        op.position = inv_pose.apply(p);
        op.normal = inv_pose.rotation * nrm;
        frag.points.push_back(op);
        out.surface_ids[k].push_back(face.surface_id);
      }
    }
    if (frag.points.empty()) {
      throw InvalidSpec("fragment " + std::to_string(k) +
                        " is empty; raise points_per_m2 or view_overlap");
    }
  }

  // Drifted odometry from its own engine: 6 draws per step, wx wy wz vx vy vz.
  std::mt19937_64 drift_rng(spec.seed ^ kDriftSalt);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k + 1 < n; ++k) {
    Vec6 xi;
    for (int j = 0; j < 3; ++j) xi[j] = spec.drift_rot_sigma * g(drift_rng);
    for (int j = 3; j < 6; ++j) xi[j] = spec.drift_trans_sigma * g(drift_rng);
    const RigidTransform rel = gt_poses[k].inverse() * gt_poses[k + 1];
    out.dataset.odometry.push_back(rel * se3_exp(xi));
  }
  out.dataset.ground_truth = gt_poses;

  // Noise-free reference cloud over the full room.
  for (const auto& face : faces) {
    const long count = std::lround(face.area * spec.points_per_m2);
    for (long s = 0; s < count; ++s) {
      OrientedPoint op;
      op.position = detail::sample_face(face, spec.floor_polygon, geom_rng);
      op.normal = face.normal;
      out.dataset.ground_truth_cloud.push_back(op);
      out.ground_truth_surface_ids.push_back(face.surface_id);
    }
  }
  return out;
}

inline Dataset synthesize_room(const SyntheticRoomSpec& spec) {
  return synthesize_room_detailed(spec).dataset;
}

}  // namespace recon
