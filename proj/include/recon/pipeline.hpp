// End-to-end pipeline: odometry refinement -> loop detection -> pose-graph
// optimization with the line process -> joint layout estimation and global
// registration -> artifacts and metrics. Fully deterministic for a fixed
// dataset and configuration.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include "recon/config.hpp"
#include "recon/dataset_io.hpp"
#include "recon/global_reg.hpp"
#include "recon/layout_io.hpp"
#include "recon/metrics.hpp"
#include "recon/pose_graph.hpp"
#include "recon/synth.hpp"

namespace recon {

struct PipelineOptions {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  bool refine_odometry = true;
  bool write_trace = true;
  bool dump_edges = false;  // pose-graph residual diagnostics
  TrajectoryAlignment alignment = TrajectoryAlignment::kAnchorFirst;

  IcpParams icp;
  LoopDetectParams loops;
  PoseGraphParams pose_graph;
  double prune_threshold = 0.25;
  PlaneExtractParams extract;
  LayoutEstimateParams layout;
  RegistrationConfig global;
};

struct PipelineResult {
  std::vector<RigidTransform> poses;
  std::optional<Layout> layout;
  JointResult joint;
  std::vector<double> pose_graph_objective;
  std::vector<IcpResult> odometry_icp;
  std::vector<LoopCandidate> loop_candidates;
  std::vector<LoopEdge> surviving_loops;

  std::optional<TrajectoryError> trajectory;
  std::optional<ReconstructionError> reconstruction;
  double chained_odometry_rmse = -1;  // baseline when ground truth is present
};

// ---------------------------------------------------------------------------
// Configuration loading

inline PipelineOptions options_from_config(const ConfigTree& cfg) {
  PipelineOptions o;
  o.dataset_dir = cfg.get_string("dataset.path", "");
  o.out_dir = cfg.get_string("dataset.out", "out");
  o.refine_odometry = cfg.get_bool("pipeline.refine_odometry", true);
  o.write_trace = cfg.get_bool("pipeline.trace", true);
  o.dump_edges = cfg.get_bool("pipeline.dump_edges", false);
  o.alignment = cfg.get_string("pipeline.trajectory_alignment", "anchor") == "bestfit"
                    ? TrajectoryAlignment::kBestFit
                    : TrajectoryAlignment::kAnchorFirst;

  o.icp.max_dist = cfg.get_double("icp.max_dist", o.icp.max_dist);
  o.icp.max_normal_angle =
      cfg.get_double("icp.max_normal_angle_deg", 30.0) * M_PI / 180.0;
  o.icp.max_iterations = cfg.get_int("icp.max_iterations", o.icp.max_iterations);
  o.icp.convergence = cfg.get_double("icp.convergence", o.icp.convergence);
  o.icp.subsample_max = cfg.get_int("icp.subsample_max", o.icp.subsample_max);

  o.loops.overlap_threshold = cfg.get_double("loops.overlap_threshold", 0.30);
  o.loops.overlap_dist = cfg.get_double("loops.overlap_dist", 0.1);
  o.loops.gate_factor = cfg.get_double("loops.gate_factor", 2.0);
  o.loops.icp = o.icp;

  o.pose_graph.mu = cfg.get_double("posegraph.mu", o.pose_graph.mu);
  o.pose_graph.hard_gating = cfg.get_bool("posegraph.hard_gating", false);
  o.pose_graph.max_outer = cfg.get_int("posegraph.max_outer", o.pose_graph.max_outer);
  o.prune_threshold = cfg.get_double("posegraph.line_threshold", 0.25);

  o.extract.seed_resolution = cfg.get_double("planes.seed_resolution", 0.25);
  o.extract.merge_threshold = cfg.get_double("planes.merge_threshold", 0.05);
  o.extract.hypothesis_max_cost = cfg.get_double("planes.hypothesis_max_cost", 0.02);
  o.extract.energy.potts_weight = cfg.get_double("planes.alpha", 0.02);
  o.extract.energy.null_cost = cfg.get_double("planes.gamma", 0.05);
  o.extract.energy.neighbor_k = cfg.get_int("planes.neighbor_k", 8);
  o.extract.energy.neighbor_radius = cfg.get_double("planes.neighbor_radius", 0.15);
  o.extract.energy.min_support = cfg.get_int("planes.min_support", 50);

  o.layout.merge_threshold = cfg.get_double("layout.merge_threshold", 0.05);
  o.layout.area_cell = cfg.get_double("layout.cell_size", 0.10);
  o.layout.area_density_min = cfg.get_int("layout.area_density_min", 1);
  o.layout.selection.cell_size = o.layout.area_cell;
  o.layout.selection.density_min = cfg.get_int("layout.density_min", 5);
  o.layout.selection.tau1 = cfg.get_double("layout.tau1", 0.1);
  o.layout.selection.tau2 = cfg.get_double("layout.tau2", 0.3);

  o.global.lambda1 = cfg.get_double("global.lambda1", -1.0);
  o.global.lambda2 = cfg.get_double("global.lambda2", -1.0);
  o.global.layout_max_dist = cfg.get_double("global.layout_max_dist", 0.1);
  o.global.pair_max_dist = cfg.get_double("global.pair_max_dist", 0.1);
  o.global.max_normal_angle =
      cfg.get_double("global.max_normal_angle_deg", 30.0) * M_PI / 180.0;
  o.global.inner_iters = cfg.get_int("global.inner_iters", 10);
  o.global.outer_iters = cfg.get_int("global.outer_iters", 20);
  o.global.convergence_eps = cfg.get_double("global.convergence_eps", 1e-5);
  o.global.use_layout = cfg.get_bool("global.use_layout", true);
  o.global.refresh_pair_correspondences =
      cfg.get_bool("global.refresh_pair_correspondences", false);
  return o;
}

inline SyntheticRoomSpec synth_spec_from_config(const ConfigTree& cfg) {
  SyntheticRoomSpec spec;
  if (cfg.has("synth.polygon")) {
    spec.floor_polygon.clear();
    for (const auto& v : cfg.get("synth.polygon").as_array("synth.polygon")) {
      const auto& pair = v.as_array("synth.polygon entry");
      if (pair.size() != 2) throw ConfigError("synth.polygon entries must be [x, y]");
      spec.floor_polygon.emplace_back(pair[0].as_number("x"), pair[1].as_number("y"));
    }
  } else {
    spec.floor_polygon = {{0, 0}, {4, 0}, {4, 3}, {0, 3}};
  }
  spec.height = cfg.get_double("synth.height", 2.5);
  spec.points_per_m2 = cfg.get_double("synth.points_per_m2", 300.0);
  spec.noise_sigma = cfg.get_double("synth.noise_sigma", 0.0);
  spec.fragment_count = cfg.get_int("synth.fragment_count", 8);
  spec.drift_rot_sigma = cfg.get_double("synth.drift_rot_sigma_deg", 0.0) * M_PI / 180.0;
  spec.drift_trans_sigma = cfg.get_double("synth.drift_trans_sigma", 0.0);
  spec.seed = cfg.get_u64("synth.seed", 0);
  spec.view_overlap = cfg.get_double("synth.view_overlap", spec.view_overlap);
  if (cfg.has("synth.clutter")) {
    for (const auto& v : cfg.get("synth.clutter").as_array("synth.clutter")) {
      const auto& box = v.as_array("synth.clutter entry");
      if (box.size() != 6) {
        throw ConfigError("synth.clutter entries must be [x, y, z, sx, sy, sz]");
      }
      ClutterBox b;
      b.min_corner = Vec3(box[0].as_number(""), box[1].as_number(""), box[2].as_number(""));
      b.size = Vec3(box[3].as_number(""), box[4].as_number(""), box[5].as_number(""));
      spec.clutter.push_back(b);
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Pipeline stages

inline PipelineResult run_pipeline(const Dataset& dataset, const PipelineOptions& opt) {
  if (dataset.fragments.empty()) throw IoError("pipeline: dataset has no fragments");
  const int n = int(dataset.fragments.size());
  PipelineResult result;

  // Stage 1: refine consecutive-pair odometry by ICP.
  std::vector<RigidTransform> odometry = dataset.odometry;
  if (opt.refine_odometry) {
    for (int k = 0; k + 1 < n; ++k) {
      IcpResult icp = icp_point_to_plane(dataset.fragments[k + 1], dataset.fragments[k],
                                         odometry[k], opt.icp);
      odometry[k] = icp.transform;
      result.odometry_icp.push_back(std::move(icp));
    }
  }
  std::vector<RigidTransform> poses = chain_odometry(odometry);

  // Stage 2: loop closures and pose-graph optimization.
  result.loop_candidates = detect_loop_closures(dataset, poses, opt.loops);
  PoseGraph graph;
  graph.nodes = poses;
  for (int k = 0; k + 1 < n; ++k) {
    graph.odometry_edges.push_back({k, k + 1, odometry[k], 1.0});
  }
  for (const auto& loop : result.loop_candidates) {
    graph.loop_edges.push_back({loop.i, loop.j, loop.transform, 1.0, 1.0});
  }
  graph = optimize_pose_graph(graph, opt.pose_graph, &result.pose_graph_objective);
  graph = prune_loops(graph, opt.prune_threshold);
  result.surviving_loops = graph.loop_edges;
  poses = graph.nodes;

  // Stage 3: joint layout estimation and global registration.
  std::vector<FragmentPair> pairs;
  for (int k = 0; k + 1 < n; ++k) {
    pairs.push_back({k, k + 1, odometry[k], {}});
  }
  for (const auto& loop : graph.loop_edges) {
    pairs.push_back({loop.i, loop.j, loop.measured, {}});
  }
  result.joint = joint_optimize(dataset.fragments, poses, std::move(pairs), opt.global,
                                opt.extract, opt.layout);
  result.poses = result.joint.poses;
  result.layout = result.joint.layout;

  // Metrics against ground truth, when available.
  if (dataset.has_ground_truth()) {
    result.trajectory = trajectory_error(result.poses, dataset.ground_truth, opt.alignment);
    result.chained_odometry_rmse =
        trajectory_error(chain_odometry(dataset.odometry), dataset.ground_truth,
                         opt.alignment)
            .rmse;
    if (!dataset.ground_truth_cloud.empty()) {
      std::vector<Vec3> est;
      for (int f = 0; f < n; ++f) {
        for (const auto& p : dataset.fragments[f].points) {
          est.push_back(result.poses[f].apply(p.position));
        }
      }
      // The reference cloud lives in the generator frame; anchor it to the
      // fragment-0 frame the pipeline works in.
      const RigidTransform anchor = dataset.ground_truth[0].inverse();
      std::vector<Vec3> gt;
      gt.reserve(dataset.ground_truth_cloud.size());
      for (const auto& p : dataset.ground_truth_cloud) {
        gt.push_back(anchor.apply(p.position));
      }
      result.reconstruction = reconstruction_error(est, gt);
    }
  }
  return result;
}

// Artifact writer: trajectory, layout, merged cloud, iteration trace, metrics.
inline void write_artifacts(const Dataset& dataset, const PipelineResult& result,
                            const PipelineOptions& opt) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + opt.out_dir.string());

  write_trajectory(result.poses, opt.out_dir / "trajectory.txt");
  if (result.layout) write_layout(*result.layout, opt.out_dir / "layout.txt");

  std::vector<OrientedPoint> merged;
  for (std::size_t f = 0; f < dataset.fragments.size(); ++f) {
    for (const auto& p : dataset.fragments[f].points) {
      merged.push_back({result.poses[f].apply(p.position),
                        result.poses[f].rotation * p.normal});
    }
  }
  write_cloud(merged, opt.out_dir / "merged_cloud.ply");

  if (opt.write_trace) {
    std::ofstream trace(opt.out_dir / "trace.txt");
    for (const auto& row : result.joint.trace) {
      trace << row.outer << " " << format_double(row.e_layout) << " "
            << format_double(row.e_frag) << " " << format_double(row.e_pair) << " "
            << format_double(row.total) << " " << row.layout_planes << "\n";
    }
  }
  if (opt.dump_edges) {
    std::ofstream edges(opt.out_dir / "edges.txt");
    for (const auto& e : result.surviving_loops) {
      edges << e.i << " " << e.j << " "
            << format_double(pose_residual(result.poses[e.i], result.poses[e.j], e.measured)
                                 .norm())
            << " " << format_double(e.line_weight) << "\n";
    }
  }
  if (result.trajectory) {
    std::ofstream metrics(opt.out_dir / "metrics.txt");
    metrics << "trajectory_rmse " << format_double(result.trajectory->rmse) << "\n";
    metrics << "trajectory_median " << format_double(result.trajectory->median) << "\n";
    metrics << "chained_odometry_rmse " << format_double(result.chained_odometry_rmse)
            << "\n";
    if (result.reconstruction) {
      metrics << "reconstruction_average " << format_double(result.reconstruction->average)
              << "\n";
      metrics << "reconstruction_median " << format_double(result.reconstruction->median)
              << "\n";
    }
  }
}

inline PipelineResult run_pipeline_files(const PipelineOptions& opt) {
  const Dataset dataset = read_dataset(opt.dataset_dir);
  PipelineResult result = run_pipeline(dataset, opt);
  write_artifacts(dataset, result, opt);
  return result;
}

}  // namespace recon
