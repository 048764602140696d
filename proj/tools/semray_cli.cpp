#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "semray/config.hpp"
#include "semray/dataset_io.hpp"
#include "semray/pipeline.hpp"

namespace fs = std::filesystem;
using namespace semray;

namespace {

struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : PipelineConfig::keys()) {
      options[key] = app->add_option("--" + key, values[key], "override " + key)->group("Parameters");
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = file.empty() ? PipelineConfig{} : load_config(file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    cfg.validate();
    return cfg;
  }
};

std::vector<Representation> parse_list(const std::string& csv) {
  std::vector<Representation> reps;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) reps.push_back(parse_representation(item));
  }
  return reps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set semantic mapping with ray frontiers"};
  app.require_subcommand(1);

  std::string scene, out;

  auto* map_cmd = app.add_subcommand("map", "Map a scene directory and export the maps");
  ConfigOptions map_cfg;
  map_cmd->add_option("scene", scene, "scene directory")->required();
  map_cmd->add_option("out", out, "output directory")->required();
  map_cfg.attach(map_cmd);

  auto* online_cmd = app.add_subcommand("bench-online", "Search-volume benchmark over representations");
  ConfigOptions online_cfg;
  std::string reps_csv = "rayfronts,sem_poses,sem_voxels,spherical_fronts,unidirectional_fronts";
  online_cmd->add_option("scene", scene, "scene directory")->required();
  online_cmd->add_option("out", out, "output directory")->required();
  online_cmd->add_option("--representations", reps_csv, "comma-separated representations");
  online_cfg.attach(online_cmd);

  auto* offline_cmd = app.add_subcommand("bench-offline", "Offline 3D segmentation evaluation");
  ConfigOptions offline_cfg;
  offline_cmd->add_option("scene", scene, "scene directory")->required();
  offline_cmd->add_option("out", out, "output directory")->required();
  offline_cfg.attach(offline_cmd);

  auto* gen_cmd = app.add_subcommand("gen-scene", "Write a synthetic scene");
  std::string preset = "beacon";
  double range = std::numeric_limits<double>::infinity();
  int width = 0, height = 0, dim = 8, frames = 0;
  double resolution = 0.0, noise = 0.0;
  std::uint64_t seed = 0;
  gen_cmd->add_option("out", out, "output directory")->required();
  gen_cmd->add_option("--preset", preset, "beacon or five_box")->check(CLI::IsMember({"beacon", "five_box"}));
  gen_cmd->add_option("--range", range, "sensor depth range in meters (inf = unlimited)");
  gen_cmd->add_option("--width", width, "image width");
  gen_cmd->add_option("--height", height, "image height");
  gen_cmd->add_option("--dim", dim, "feature dimension");
  gen_cmd->add_option("--frames", frames, "number of poses");
  gen_cmd->add_option("--resolution", resolution, "ground-truth resolution");
  gen_cmd->add_option("--noise", noise, "feature noise stddev");
  gen_cmd->add_option("--seed", seed, "noise seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_cmd->parsed()) {
      const RunReport report = run_mapping(scene, map_cfg.resolve(), out);
      std::printf("frames %zu  voxels %zu  rays %zu  occupancy cells %zu (+%zu regions)  frontiers %zu  %.1f ms\n",
                  report.frames.size(), report.semantic_voxels, report.ray_entries, report.occupancy_cells,
                  report.occupancy_regions, report.frontiers, report.totalMs());
    } else if (online_cmd->parsed()) {
      const auto results = run_online_benchmark(scene, online_cfg.resolve(), parse_list(reps_csv), out);
      std::printf("%-22s %10s %10s\n", "representation", "scvr_auc", "miou_auc");
      for (const auto& r : results) {
        std::printf("%-22s %10.4f %10.4f\n", to_string(r.rep), r.mean_scvr_auc, r.miou_auc);
      }
    } else if (offline_cmd->parsed()) {
      const OfflineResult r = run_offline_eval(scene, offline_cfg.resolve(), out);
      std::printf("mIoU %.4f  f-mIoU %.4f  Acc %.4f  (k=%d, frame_skip=%d, %zu frames, %zu voxels)\n", r.scores.miou,
                  r.scores.fmiou, r.scores.acc, r.k, r.frame_skip, r.frames_used, r.voxels);
    } else if (gen_cmd->parsed()) {
      SceneSpec spec;
      if (preset == "beacon") {
        spec = beacon_hall_scene(range, width > 0 ? width : 80, height > 0 ? height : 60, dim,
                                 frames > 0 ? static_cast<std::size_t>(frames) : 48);
      } else {
        spec = five_box_scene(width > 0 ? width : 96, height > 0 ? height : 72, dim,
                              frames > 0 ? static_cast<std::size_t>(frames) : 60, resolution > 0 ? resolution : 0.25);
        spec.depth_range = range;
      }
      if (resolution > 0) spec.gt_resolution = resolution;
      spec.feature_noise = noise;
      spec.seed = seed;
      write_scene(out, generate_synthetic_scene(spec));
      std::printf("wrote %zu frames to %s\n", spec.trajectory.size(), out.c_str());
    }
  } catch (const PipelineError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
