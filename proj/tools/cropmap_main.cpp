#include <CLI11.hpp>
#include <iostream>

#include "cropmap/app.hpp"
#include "cropmap/errors.hpp"

namespace {

struct NullBuf : std::streambuf {
  int overflow(int c) override { return c; }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace cropmap;

  CLI::App app{"ground-vehicle LiDAR crop mapping pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_flag("--verbose", verbose, "log progress to stderr");

  std::uint64_t seed = 0;
  bool seed_set = false;
  auto* seed_opt =
      app.add_option("--seed", seed, "override the simulator seed");

  std::string out_dir, in_dir, cloud_path, corners_path, csv_path;
  std::string samples_path, model_path, metrics_path;
  int order = 0;
  std::string method;
  std::vector<double> e_values;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic recording");
  sim->add_option("out_dir", out_dir, "output directory")->required();

  auto* map = app.add_subcommand("map", "assemble a georeferenced cloud");
  map->add_option("in_dir", in_dir, "directory with imu.csv/gnss.csv/scans.bin")
      ->required();
  map->add_option("out_cloud", cloud_path, "output PLY path")->required();

  auto* vol = app.add_subcommand("volume", "per-parcel canopy metrics");
  vol->add_option("cloud", cloud_path, "input PLY")->required();
  vol->add_option("corners", corners_path, "parcel corners CSV")->required();
  vol->add_option("out_csv", csv_path, "output metrics CSV")->required();
  vol->add_option("--method", method, "voxel or column");

  auto* fit = app.add_subcommand("fit", "fit a biomass model");
  fit->add_option("samples", samples_path, "samples CSV")->required();
  fit->add_option("out_model", model_path, "output model JSON")->required();
  fit->add_option("--order", order, "polynomial order (1 or 2)");

  auto* pred = app.add_subcommand("predict", "evaluate a model");
  pred->add_option("model", model_path, "model JSON")->required();
  pred->add_option("e_v", e_values, "volume densities (m3/ha)")->required();

  auto* rep = app.add_subcommand("report", "emit scatter plot and summary");
  rep->add_option("metrics", metrics_path, "metrics CSV")->required();
  rep->add_option("samples", samples_path, "samples CSV")->required();
  rep->add_option("model", model_path, "model JSON")->required();
  rep->add_option("out_dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  NullBuf null_buf;
  std::ostream null_stream(&null_buf);
  std::ostream& log = verbose ? std::cerr : null_stream;

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_set) cfg.sim.seed = seed;
    if (!method.empty()) {
      if (method == "voxel")
        cfg.parcels.method = VolumeMethod::voxel_occupancy;
      else if (method == "column")
        cfg.parcels.method = VolumeMethod::column_height;
      else
        throw SchemaError("--method must be 'voxel' or 'column'");
    }
    if (order != 0) {
      if (order != 1 && order != 2)
        throw SchemaError("--order must be 1 or 2");
      cfg.biomass.order = order;
    }

    if (sim->parsed()) {
      run_simulate(cfg, out_dir, &log);
    } else if (map->parsed()) {
      run_map(cfg, in_dir, cloud_path, &log);
    } else if (vol->parsed()) {
      run_volume(cfg, cloud_path, corners_path, csv_path, &log);
    } else if (fit->parsed()) {
      run_fit(samples_path, cfg.biomass.order, model_path, &log);
    } else if (pred->parsed()) {
      run_predict(model_path, e_values, std::cout);
    } else if (rep->parsed()) {
      run_report(metrics_path, samples_path, model_path, out_dir, &log);
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
