// reconstruct: scan-fragment reconstruction pipeline.
//
//   reconstruct synth  --config room.toml [--out DIR] [--seed N]
//   reconstruct run    --config room.toml [--out DIR] [--no-layout] [--trace]
//   reconstruct eval   --dataset DIR --trajectory FILE [--alignment anchor|bestfit]
//   reconstruct layout --dataset DIR --trajectory FILE --out DIR
//                      [--config FILE] [--grid-dump] [--labels-dump]
//
// Exit codes: 0 success, 2 configuration error, 3 io error, 4 numerical
// failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "recon/pipeline.hpp"

namespace {

const char* category_name(recon::ErrorCategory c) {
  switch (c) {
    case recon::ErrorCategory::kConfig:
      return "config";
    case recon::ErrorCategory::kIo:
      return "io";
    default:
      return "numeric";
  }
}

int exit_code(recon::ErrorCategory c) {
  switch (c) {
    case recon::ErrorCategory::kConfig:
      return 2;
    case recon::ErrorCategory::kIo:
      return 3;
    default:
      return 4;
  }
}

struct Args {
  std::string config_path;
  std::string out_dir;
  std::string dataset_dir;
  std::string trajectory_path;
  std::string alignment = "anchor";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool no_layout = false;
  bool trace = false;
  bool grid_dump = false;
  bool labels_dump = false;
};

recon::ConfigTree load_config(const Args& args) {
  if (args.config_path.empty()) return recon::ConfigTree::parse_string("", "<none>");
  return recon::ConfigTree::parse_file(args.config_path);
}

int cmd_synth(const Args& args) {
  const recon::ConfigTree cfg = load_config(args);
  recon::SyntheticRoomSpec spec = recon::synth_spec_from_config(cfg);
  if (args.seed_set) spec.seed = args.seed;
  std::string out = args.out_dir;
  if (out.empty()) out = cfg.get_string("dataset.path", "");
  if (out.empty()) throw recon::ConfigError("synth: no output directory (--out or dataset.path)");
  const recon::Dataset dataset = recon::synthesize_room(spec);
  recon::write_dataset(dataset, out);
  std::cout << "wrote " << dataset.fragments.size() << " fragments to " << out << "\n";
  return 0;
}

int cmd_run(const Args& args) {
  if (args.config_path.empty()) throw recon::ConfigError("run: --config is required");
  const recon::ConfigTree cfg = load_config(args);
  recon::PipelineOptions opt = recon::options_from_config(cfg);
  if (!args.out_dir.empty()) opt.out_dir = args.out_dir;
  if (args.no_layout) opt.global.use_layout = false;
  if (args.trace) opt.write_trace = true;
  if (opt.dataset_dir.empty()) throw recon::ConfigError("run: dataset.path is not set");

  const recon::PipelineResult result = recon::run_pipeline_files(opt);
  std::cout << "poses " << result.poses.size();
  if (result.layout) {
    std::cout << ", layout base + " << result.layout->walls.size() << " walls";
  }
  if (result.trajectory) {
    std::cout << ", trajectory rmse " << result.trajectory->rmse;
  }
  std::cout << ", artifacts in " << opt.out_dir << "\n";
  return 0;
}

int cmd_eval(const Args& args) {
  const recon::Dataset dataset = recon::read_dataset(args.dataset_dir);
  if (!dataset.has_ground_truth()) {
    throw recon::IoError("eval: dataset has no gt_trajectory.txt");
  }
  const auto est = recon::read_trajectory(args.trajectory_path);
  const auto alignment = args.alignment == "bestfit"
                             ? recon::TrajectoryAlignment::kBestFit
                             : recon::TrajectoryAlignment::kAnchorFirst;
  const recon::TrajectoryError te =
      recon::trajectory_error(est, dataset.ground_truth, alignment);
  std::cout << "trajectory_rmse " << te.rmse << "\n";
  std::cout << "trajectory_median " << te.median << "\n";
  if (!dataset.ground_truth_cloud.empty()) {
    std::vector<recon::Vec3> est_cloud, gt_cloud;
    for (std::size_t f = 0; f < dataset.fragments.size(); ++f) {
      for (const auto& p : dataset.fragments[f].points) {
        est_cloud.push_back(est[f].apply(p.position));
      }
    }
    const recon::RigidTransform anchor = dataset.ground_truth[0].inverse();
    for (const auto& p : dataset.ground_truth_cloud) {
      gt_cloud.push_back(anchor.apply(p.position));
    }
    const recon::ReconstructionError re = recon::reconstruction_error(est_cloud, gt_cloud);
    std::cout << "reconstruction_average " << re.average << "\n";
    std::cout << "reconstruction_median " << re.median << "\n";
  }
  return 0;
}

int cmd_layout(const Args& args) {
  const recon::ConfigTree cfg = load_config(args);
  const recon::PipelineOptions opt = recon::options_from_config(cfg);
  const recon::Dataset dataset = recon::read_dataset(args.dataset_dir);
  const auto poses = recon::read_trajectory(args.trajectory_path);
  if (poses.size() != dataset.fragments.size()) {
    throw recon::IoError("layout: trajectory length does not match fragment count");
  }
  std::vector<recon::PlaneLabeling> labelings;
  for (const auto& f : dataset.fragments) {
    labelings.push_back(recon::extract_fragment_planes(f, opt.extract));
  }
  const auto layout =
      recon::estimate_layout(labelings, poses, dataset.fragments, opt.layout);
  if (!layout) throw recon::NoPlanes("layout: no dominant planes found");

  std::filesystem::create_directories(args.out_dir);
  recon::write_layout(*layout, std::filesystem::path(args.out_dir) / "layout.txt");
  if (args.grid_dump) {
    recon::write_grid_pgm(layout->grid, std::filesystem::path(args.out_dir) / "grid.pgm");
  }
  if (args.labels_dump) {
    for (std::size_t f = 0; f < labelings.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "labels_%04zu.txt", f);
      std::ofstream out(std::filesystem::path(args.out_dir) / name);
      for (std::size_t p = 0; p < labelings[f].labels.size(); ++p) {
        out << p << " " << labelings[f].labels[p] << "\n";
      }
    }
  }
  std::cout << "layout: base + " << layout->walls.size() << " walls written to "
            << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"indoor scan-fragment reconstruction"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "configuration file");
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);

  CLI::App* run = app.add_subcommand("run", "run the full pipeline");
  add_common(run);
  run->add_flag("--no-layout", args.no_layout, "disable the layout term");
  run->add_flag("--trace", args.trace, "write per-iteration energies");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a trajectory against ground truth");
  eval->add_option("--dataset", args.dataset_dir, "dataset directory")->required();
  eval->add_option("--trajectory", args.trajectory_path, "estimated trajectory")->required();
  eval->add_option("--alignment", args.alignment, "anchor|bestfit");

  CLI::App* layout = app.add_subcommand("layout", "layout estimation from a trajectory");
  add_common(layout);
  layout->add_option("--dataset", args.dataset_dir, "dataset directory")->required();
  layout->add_option("--trajectory", args.trajectory_path, "trajectory file")->required();
  layout->add_flag("--grid-dump", args.grid_dump, "write the occupancy grid as a PGM");
  layout->add_flag("--labels-dump", args.labels_dump, "write per-point plane labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (run->parsed()) return cmd_run(args);
    if (eval->parsed()) return cmd_eval(args);
    if (layout->parsed()) return cmd_layout(args);
  } catch (const recon::Error& e) {
    std::cerr << "error: category=" << category_name(e.category()) << " " << e.what()
              << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: category=numeric " << e.what() << "\n";
    return 4;
  }
  return 2;
}
