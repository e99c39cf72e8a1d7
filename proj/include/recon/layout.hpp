// Scene-layout estimation: merge per-fragment planes into world-frame
// dominant planes, rank them by occupancy-grid area, and select the layout
// (base plane plus walls) by perpendicularity and boundary-distance criteria
// under the weak Manhattan assumption.

#pragma once

#include <optional>
#include <vector>

#include "recon/error.hpp"
#include "recon/fragment.hpp"
#include "recon/geometry.hpp"
#include "recon/graphcut.hpp"
#include "recon/hac.hpp"

namespace recon {

struct DominantPlane {
  PlaneHypothesis plane;                     // world frame
  std::vector<std::pair<int, int>> inliers;  // (fragment index, point index)
  std::vector<Vec3> world_points;            // inlier positions in world frame
  double area = 0.0;                         // occupied-cell estimate, m^2
};

struct OccupancyGrid {
  Vec3 anchor = Vec3::Zero();  // 3D point on the plane where 2D coords start
  Vec3 axis_u = Vec3::UnitX(), axis_v = Vec3::UnitY();  // in-plane axes
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();     // 2D corner of cell (0,0)
  double cell_size = 0.1;
  int width = 0, height = 0;
  std::vector<std::uint8_t> occupancy;  // row-major, width * height

  bool occupied(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= width || iy >= height) return false;
    return occupancy[std::size_t(iy) * width + ix] != 0;
  }
  Eigen::Vector2d project(const Vec3& p) const {
    return {axis_u.dot(p - anchor), axis_v.dot(p - anchor)};
  }
  Eigen::Vector2d cell_center(int ix, int iy) const {
    return origin + Eigen::Vector2d((ix + 0.5) * cell_size, (iy + 0.5) * cell_size);
  }
};

struct Layout {
  DominantPlane base;
  std::vector<DominantPlane> walls;
  // A second base-parallel plane (the opposite of floor/ceiling) that also
  // passed the boundary criterion; rarely populated since such planes project
  // across the room interior.
  std::optional<DominantPlane> co_base;
  std::vector<Eigen::Vector2i> boundary;
  OccupancyGrid grid;
};

namespace detail {

// Monotone-chain convex hull; input points are sorted lexicographically.
inline std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                          return a.x() == b.x() && a.y() == b.y();
                        }),
            pts.end());
  const int n = int(pts.size());
  if (n < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Direction of the minimum-area bounding rectangle (rotating calipers over
// hull edges). Edge-aligned for rectangular footprints and equivariant under
// rigid motion of the data, which keeps occupancy-cell counts stable.
inline Eigen::Vector2d min_rect_direction(const std::vector<Eigen::Vector2d>& hull) {
  if (hull.size() < 2) return {1.0, 0.0};
  if (hull.size() == 2) return (hull[1] - hull[0]).normalized();
  double best_area = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_dir(1.0, 0.0);
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d e = hull[(i + 1) % hull.size()] - hull[i];
    if (e.squaredNorm() < 1e-24) continue;
    const Eigen::Vector2d d = e.normalized();
    const Eigen::Vector2d dp(-d.y(), d.x());
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const auto& p : hull) {
      lo_u = std::min(lo_u, d.dot(p));
      hi_u = std::max(hi_u, d.dot(p));
      lo_v = std::min(lo_v, dp.dot(p));
      hi_v = std::max(hi_v, dp.dot(p));
    }
    const double area = (hi_u - lo_u) * (hi_v - lo_v);
    if (area < best_area - 1e-15) {
      best_area = area;
      best_dir = d;
    }
  }
  return best_dir;
}

// In-plane axes anchored to the projected data via the minimum-area bounding
// rectangle, so cell counts are stable under rigid motion of the whole scene.
inline void anchored_plane_frame(const PlaneHypothesis& plane, const std::vector<Vec3>& pts,
                                 Vec3* anchor, Vec3* u_out, Vec3* v_out) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  if (!pts.empty()) c /= double(pts.size());
  *anchor = plane.project(c);

  auto [u0, v0] = orthonormal_basis(plane.normal);
  std::vector<Eigen::Vector2d> projected;
  projected.reserve(pts.size());
  for (const auto& p : pts) {
    const Vec3 d = p - *anchor;
    projected.emplace_back(u0.dot(d), v0.dot(d));
  }
  const Eigen::Vector2d dir = min_rect_direction(convex_hull(std::move(projected)));
  const Vec3 u = (dir.x() * u0 + dir.y() * v0).normalized();
  *u_out = u;
  *v_out = plane.normal.cross(u);
}

}  // namespace detail

// Occupancy grid on a plane from a set of world points; a cell is occupied
// when it holds at least density_min projected points.
inline OccupancyGrid build_occupancy_grid(const std::vector<Vec3>& points,
                                          const PlaneHypothesis& plane, double cell_size,
                                          int density_min) {
  OccupancyGrid grid;
  grid.cell_size = cell_size;
  if (points.empty()) return grid;
  detail::anchored_plane_frame(plane, points, &grid.anchor, &grid.axis_u, &grid.axis_v);

  Eigen::Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
  std::vector<Eigen::Vector2d> projected;
  projected.reserve(points.size());
  for (const auto& p : points) {
    const Eigen::Vector2d q = grid.project(p);
    projected.push_back(q);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  grid.origin = lo;
  grid.width = int((hi.x() - lo.x()) / cell_size) + 1;
  grid.height = int((hi.y() - lo.y()) / cell_size) + 1;
  std::vector<int> counts(std::size_t(grid.width) * grid.height, 0);
  for (const auto& q : projected) {
    const int ix = std::min(grid.width - 1, int((q.x() - lo.x()) / cell_size));
    const int iy = std::min(grid.height - 1, int((q.y() - lo.y()) / cell_size));
    counts[std::size_t(iy) * grid.width + ix]++;
  }
  grid.occupancy.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    grid.occupancy[i] = counts[i] >= density_min ? 1 : 0;
  }
  return grid;
}

inline OccupancyGrid build_occupancy_grid(const std::vector<Vec3>& points,
                                          const DominantPlane& base, double cell_size,
                                          int density_min) {
  return build_occupancy_grid(points, base.plane, cell_size, density_min);
}

// Occupied cells with at least one of their 4-neighbors unoccupied or outside.
inline std::vector<Eigen::Vector2i> boundary_cells(const OccupancyGrid& grid) {
  std::vector<Eigen::Vector2i> out;
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      if (!grid.occupied(ix, iy)) continue;
      if (!grid.occupied(ix - 1, iy) || !grid.occupied(ix + 1, iy) ||
          !grid.occupied(ix, iy - 1) || !grid.occupied(ix, iy + 1)) {
        out.emplace_back(ix, iy);
      }
    }
  }
  return out;
}

// Occupied-cell area of a dominant plane's own grid.
inline double plane_area(const DominantPlane& plane, double cell_size, int density_min = 1) {
  const OccupancyGrid grid =
      build_occupancy_grid(plane.world_points, plane.plane, cell_size, density_min);
  std::size_t occupied = 0;
  for (auto v : grid.occupancy) occupied += v;
  return double(occupied) * cell_size * cell_size;
}

// Transforms every fragment's labeled planes and inliers into the world frame
// and clusters them once more; merged planes are refit on their pooled
// inliers.
inline std::vector<DominantPlane> merge_dominant_planes(
    const std::vector<PlaneLabeling>& per_fragment, const std::vector<RigidTransform>& poses,
    double merge_threshold, const std::vector<Fragment>& fragments) {
  std::vector<PlaneHypothesis> hypotheses;
  std::vector<std::vector<Vec3>> supports;
  std::vector<std::vector<std::pair<int, int>>> inlier_lists;
  std::vector<std::vector<Vec3>> world_lists;

  for (std::size_t f = 0; f < per_fragment.size(); ++f) {
    const auto& labeling = per_fragment[f];
    std::vector<std::vector<std::pair<int, int>>> by_plane(labeling.planes.size());
    for (std::size_t p = 0; p < labeling.labels.size(); ++p) {
      if (labeling.labels[p] != kNullLabel) {
        by_plane[labeling.labels[p]].emplace_back(int(f), int(p));
      }
    }
    for (std::size_t l = 0; l < labeling.planes.size(); ++l) {
      if (by_plane[l].empty()) continue;
      hypotheses.push_back(transform_plane(poses[f], labeling.planes[l]));
      std::vector<Vec3> world;
      world.reserve(by_plane[l].size());
      for (const auto& [fi, pi] : by_plane[l]) {
        world.push_back(poses[fi].apply(fragments[fi].points[pi].position));
      }
      world_lists.push_back(world);
      std::vector<Vec3> eval = world;
      if (eval.size() > 800) {
        std::vector<Vec3> sub;
        sub.reserve(800);
        const double stride = double(eval.size()) / 800.0;
        for (int k = 0; k < 800; ++k) sub.push_back(eval[std::size_t(k * stride)]);
        eval = std::move(sub);
      }
      supports.push_back(std::move(eval));
      inlier_lists.push_back(std::move(by_plane[l]));
    }
  }

  std::vector<std::vector<int>> groups;
  const auto merged = hac_cluster(hypotheses, supports, merge_threshold, &groups);

  std::vector<DominantPlane> out;
  for (std::size_t g = 0; g < merged.size(); ++g) {
    DominantPlane dp;
    dp.plane = merged[g];
    for (int m : groups[g]) {
      dp.inliers.insert(dp.inliers.end(), inlier_lists[m].begin(), inlier_lists[m].end());
      dp.world_points.insert(dp.world_points.end(), world_lists[m].begin(),
                             world_lists[m].end());
    }
    if (groups[g].size() > 1) {
      // Refit on the full pooled inlier set, keeping the cluster orientation.
      try {
        const Vec3 toward =
            dp.plane.project(dp.world_points.front()) + dp.plane.normal;  // normal side
        dp.plane = trimmed_plane_fit(dp.world_points, toward);
      } catch (const DegenerateInput&) {
      }
    }
    out.push_back(std::move(dp));
  }
  return out;
}

inline int select_base_plane_index(const std::vector<DominantPlane>& planes) {
  if (planes.empty()) throw NoPlanes("select_base_plane: no dominant planes");
  int best = 0;
  for (int i = 1; i < int(planes.size()); ++i) {
    if (planes[i].area > planes[best].area) best = i;  // ties keep the lower index
  }
  return best;
}

inline const DominantPlane& select_base_plane(const std::vector<DominantPlane>& planes) {
  return planes[select_base_plane_index(planes)];
}

struct LayoutParams {
  double cell_size = 0.10;
  int density_min = 5;   // occupancy threshold of the base grid
  double tau1 = 0.1;     // |n_wall . n_base| below this counts as perpendicular
  double tau2 = 0.3;     // meters, mean projected distance to the boundary
};

namespace detail {

// Mean distance between a plane's projected inliers and the nearest boundary
// cell center.
inline double boundary_distance(const DominantPlane& plane, const OccupancyGrid& grid,
                                const std::vector<Eigen::Vector2i>& boundary) {
  if (plane.world_points.empty() || boundary.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  std::vector<Eigen::Vector2d> centers;
  centers.reserve(boundary.size());
  for (const auto& b : boundary) centers.push_back(grid.cell_center(b.x(), b.y()));
  double sum = 0;
  for (const auto& p : plane.world_points) {
    const Eigen::Vector2d q = grid.project(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) best = std::min(best, (c - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / double(plane.world_points.size());
}

}  // namespace detail

// Walls are the dominant planes that are (a) perpendicular to the base within
// tau1 and (b) whose inliers project near the occupancy boundary within tau2.
// Selected wall normals are snapped exactly perpendicular to the base normal
// and their offsets refit on the inliers.
inline Layout select_layout(const std::vector<DominantPlane>& planes, int base_index,
                            const OccupancyGrid& grid, const LayoutParams& params) {
  Layout layout;
  layout.base = planes[base_index];
  layout.grid = grid;
  layout.boundary = boundary_cells(grid);
  const Vec3 nb = layout.base.plane.normal;

  for (int i = 0; i < int(planes.size()); ++i) {
    if (i == base_index) continue;
    const double perp = std::abs(planes[i].plane.normal.dot(nb));
    const bool near_boundary =
        detail::boundary_distance(planes[i], grid, layout.boundary) < params.tau2;
    if (perp < params.tau1 && near_boundary) {
      DominantPlane wall = planes[i];
      Vec3 n = wall.plane.normal - wall.plane.normal.dot(nb) * nb;
      n.normalize();
      wall.plane.normal = n;
      wall.plane.offset = trimmed_offset(n, wall.world_points);
      layout.walls.push_back(std::move(wall));
    } else if (perp > 1.0 - params.tau1 && near_boundary && !layout.co_base) {
      layout.co_base = planes[i];
    }
  }
  return layout;
}

// All layout planes that participate in point-to-layout correspondences.
inline std::vector<PlaneHypothesis> layout_planes(const Layout& layout) {
  std::vector<PlaneHypothesis> out;
  out.push_back(layout.base.plane);
  if (layout.co_base) out.push_back(layout.co_base->plane);
  for (const auto& w : layout.walls) out.push_back(w.plane);
  return out;
}

struct LayoutEstimateParams {
  double merge_threshold = 0.05;  // world-frame HAC stop
  double area_cell = 0.10;        // cell size for per-plane area estimates
  int area_density_min = 1;
  LayoutParams selection;
};

// Full layout stage under the current poses: world-frame plane merging, base
// selection by area, occupancy grid over all points, wall selection. Returns
// nothing when no dominant plane exists.
inline std::optional<Layout> estimate_layout(const std::vector<PlaneLabeling>& per_fragment,
                                             const std::vector<RigidTransform>& poses,
                                             const std::vector<Fragment>& fragments,
                                             const LayoutEstimateParams& params) {
  std::vector<DominantPlane> planes =
      merge_dominant_planes(per_fragment, poses, params.merge_threshold, fragments);
  if (planes.empty()) return std::nullopt;
  for (auto& p : planes) {
    p.area = plane_area(p, params.area_cell, params.area_density_min);
  }
  const int base = select_base_plane_index(planes);

  std::vector<Vec3> all_points;
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    for (const auto& p : fragments[f].points) {
      all_points.push_back(poses[f].apply(p.position));
    }
  }
  const OccupancyGrid grid = build_occupancy_grid(
      all_points, planes[base], params.selection.cell_size, params.selection.density_min);
  return select_layout(planes, base, grid, params.selection);
}

}  // namespace recon
