#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cropmap/angles.hpp"
#include "cropmap/app.hpp"
#include "cropmap/errors.hpp"

using namespace cropmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cropmap_app_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// small, fast simulation: one parcel, coarse beams
RunConfig small_config() {
  RunConfig c;
  c.lidar.azimuth_step = deg2rad(3.0);
  c.lidar.range_sigma = 0.015;
  c.lidar.max_range = 10.0;
  c.sim.field.parcel_rows = 1;
  c.sim.field.parcel_cols = 1;
  c.sim.field.stripe_width = 0.12;  // contiguous canopy
  c.sim.field.canopy_heights = {0.5};
  c.sim.field.margin = 4.0;
  c.sim.traj.pass_offsets_x = {-1.2, 1.14, 3.5};
  c.sim.traj.speed = 1.5;
  c.sim.traj.gnss_sigma = 0.01;
  c.sim.traj.y_margin = 3.0;
  c.sim.hf_cell = 0.05;
  c.sim.seed = 11;
  c.cloud.ground.fill_radius = 3.0;
  c.parcels.method = VolumeMethod::column_height;
  c.finalize();
  return c;
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("config defaults and overrides") {
  TempDir d;
  SUBCASE("default config round-trips through its own file") {
    RunConfig c;
    const auto p = d.path / "config.json";
    write_config(p, c);
    RunConfig loaded = load_config(p);
    CHECK(loaded.cloud.voxel_leaf == c.cloud.voxel_leaf);
    CHECK(loaded.fusion.gnss_sigma == c.fusion.gnss_sigma);
    CHECK(loaded.parcels.leaf == c.parcels.leaf);
    CHECK(loaded.sim.field.parcel_cols == 21);
    CHECK(loaded.lidar.range_sigma == c.lidar.range_sigma);
    CHECK(loaded.biomass.noise_sigma == 6240.0);
    CHECK(loaded.rig.sensor_mount.rotation.isApprox(
        c.rig.sensor_mount.rotation, 1e-12));
  }
  SUBCASE("partial config keeps defaults elsewhere") {
    const auto p = d.path / "partial.json";
    atomic_write(p, "{\"cloud\": {\"voxel_leaf_m\": 0.02}}\n");
    RunConfig c = load_config(p);
    CHECK(c.cloud.voxel_leaf == 0.02);
    CHECK(c.cloud.segment_h_thresh == 0.10);
    CHECK(c.sim.field.parcel_width == 2.28);
  }
  SUBCASE("unknown keys rejected with a path") {
    const auto p = d.path / "bad.json";
    atomic_write(p, "{\"cloud\": {\"voxel\": 0.02}}\n");
    try {
      load_config(p);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("voxel") != std::string::npos);
      CHECK(std::string(e.what()).find("cloud") != std::string::npos);
    }
    atomic_write(p, "{\"turbo\": true}\n");
    CHECK_THROWS_AS(load_config(p), SchemaError);
    atomic_write(p, "{\"sim\": {\"field\": {\"rows\": 2}}}\n");
    CHECK_THROWS_AS(load_config(p), SchemaError);
  }
  SUBCASE("bad values rejected") {
    const auto p = d.path / "bad.json";
    atomic_write(p, "{\"parcels\": {\"method\": \"best\"}}\n");
    CHECK_THROWS_AS(load_config(p), SchemaError);
    atomic_write(p, "{\"biomass\": {\"order\": 3}}\n");
    CHECK_THROWS_AS(load_config(p), SchemaError);
    atomic_write(p, "{\"fusion\": {\"max_gap_s\": \"soon\"}}\n");
    CHECK_THROWS_AS(load_config(p), SchemaError);
    atomic_write(p, "not json");
    CHECK_THROWS_AS(load_config(p), SchemaError);
  }
  SUBCASE("mount angles materialize the sensor transform") {
    const auto p = d.path / "mount.json";
    atomic_write(p, "{\"rig\": {\"mount_rpy_deg\": [0, 0, 0]}}\n");
    RunConfig c = load_config(p);
    CHECK(c.rig.sensor_mount.rotation.isIdentity(1e-12));
    CHECK(c.sim.rig.sensor_mount.rotation.isIdentity(1e-12));
  }
}

TEST_CASE("simulate command artifacts") {
  TempDir d;
  RunConfig cfg = small_config();
  const auto out = d.path / "run";
  run_simulate(cfg, out);

  SUBCASE("all files exist, truth rows match parcel count") {
    for (const char* name : {"imu.csv", "gnss.csv", "scans.bin", "corners.csv",
                             "truth.csv", "samples.csv"})
      CHECK(fs::exists(out / name));
    CHECK(read_truth_csv(out / "truth.csv").size() == 1);
    CHECK(read_corners_csv(out / "corners.csv").size() == 1);
    CHECK(!read_scans(out / "scans.bin").empty());
  }

  SUBCASE("same seed twice is byte-identical") {
    TempDir d2;
    run_simulate(cfg, d2.path / "run");
    for (const char* name : {"imu.csv", "gnss.csv", "scans.bin", "corners.csv",
                             "truth.csv", "samples.csv"}) {
      INFO(name);
      CHECK(slurp(out / name) == slurp(d2.path / "run" / name));
    }
  }

  SUBCASE("zero canopy gives zero truth volumes") {
    RunConfig flat = cfg;
    flat.sim.field.canopy_heights = {0.0};
    run_simulate(flat, d.path / "flat");
    for (const auto& row : read_truth_csv(d.path / "flat" / "truth.csv"))
      CHECK(row.volume_m3 == 0.0);
  }
}

TEST_CASE("map and volume pipeline") {
  TempDir d;
  RunConfig cfg = small_config();
  const auto run_dir = d.path / "run";
  run_simulate(cfg, run_dir);
  const auto ply = d.path / "cloud.ply";

  SUBCASE("mapping covers the field, volume within 15% of truth") {
    std::ostringstream log;
    auto mr = run_map(cfg, run_dir, ply, &log);
    CHECK(mr.cloud.size() > 10000);
    // bounding box stays near the simulated field footprint
    const LocalFrame sim_frame{cfg.sim.field.origin, "sim"};
    for (const auto& p : mr.cloud.points) {
      const Eigen::Vector3d utm{
          mr.cloud.frame.origin.easting + p.x(),
          mr.cloud.frame.origin.northing + p.y(),
          mr.cloud.frame.origin.alt_m + p.z()};
      const double lx = utm.x() - sim_frame.origin.easting;
      const double ly = utm.y() - sim_frame.origin.northing;
      CHECK(lx > -cfg.sim.field.margin - 11.0);
      CHECK(lx < cfg.sim.field.block_width() + cfg.sim.field.margin + 11.0);
      CHECK(ly > -cfg.sim.field.margin - 11.0);
      CHECK(ly < cfg.sim.field.block_length() + cfg.sim.field.margin + 11.0);
    }
    CHECK(log.str().find("scans used") != std::string::npos);

    auto metrics = run_volume(cfg, ply, run_dir / "corners.csv",
                              d.path / "metrics.csv");
    REQUIRE(metrics.size() == 1);
    const double truth = read_truth_csv(run_dir / "truth.csv")[0].e_v_m3_ha;
    CHECK(std::abs(metrics[0].e_v_m3_per_ha - truth) <= 0.15 * truth);
    CHECK(fs::exists(d.path / "metrics.csv"));
    CHECK(read_metrics_csv(d.path / "metrics.csv").size() == 1);
  }

  SUBCASE("empty scan stream -> empty cloud, no error") {
    write_scans(run_dir / "scans.bin", {});
    std::ostringstream log;
    auto mr = run_map(cfg, run_dir, ply, &log);
    CHECK(mr.cloud.size() == 0);
    CHECK(log.str().find("warning") != std::string::npos);
    CHECK(fs::exists(ply));
  }

  SUBCASE("scans outside the track span -> error") {
    auto scans = read_scans(run_dir / "scans.bin");
    for (auto& s : scans) {
      s.sweep_start += 1e6;
      for (auto& r : s.returns) r.t += 1e6;
    }
    write_scans(run_dir / "scans.bin", scans);
    CHECK_THROWS_AS(run_map(cfg, run_dir, ply), DomainError);
  }

  SUBCASE("empty corners -> header-only metrics") {
    run_map(cfg, run_dir, ply);
    write_corners_csv(run_dir / "corners.csv", {});
    auto metrics = run_volume(cfg, ply, run_dir / "corners.csv",
                              d.path / "metrics.csv");
    CHECK(metrics.empty());
    CHECK(slurp(d.path / "metrics.csv") ==
          "id,n_points,n_plant,footprint_m2,volume_m3,e_v_m3_per_ha,method,"
          "low_confidence\n");
  }

  SUBCASE("duplicate boundary ids -> schema error") {
    run_map(cfg, run_dir, ply);
    auto recs = read_corners_csv(run_dir / "corners.csv");
    recs.push_back(recs[0]);
    write_corners_csv(run_dir / "corners.csv", recs);
    CHECK_THROWS_AS(run_volume(cfg, ply, run_dir / "corners.csv",
                               d.path / "metrics.csv"),
                    SchemaError);
  }

  SUBCASE("all-degenerate corners -> error, single bad row only warns") {
    run_map(cfg, run_dir, ply);
    auto recs = read_corners_csv(run_dir / "corners.csv");
    BoundaryRecord bad = recs[0];
    bad.id = "broken";
    bad.corners[1] = bad.corners[0];
    bad.corners[2] = bad.corners[0];

    std::ostringstream log;
    auto with_warn = recs;
    with_warn.push_back(bad);
    write_corners_csv(run_dir / "corners.csv", with_warn);
    auto metrics = run_volume(cfg, ply, run_dir / "corners.csv",
                              d.path / "metrics.csv", &log);
    CHECK(metrics.size() == 1);
    CHECK(log.str().find("broken") != std::string::npos);

    write_corners_csv(run_dir / "corners.csv", {bad});
    CHECK_THROWS_AS(run_volume(cfg, ply, run_dir / "corners.csv",
                               d.path / "metrics.csv"),
                    DomainError);
  }
}

TEST_CASE("fit, predict and report commands") {
  TempDir d;
  setenv("CROPMAP_CREATED", "2026-01-01T00:00:00Z", 1);

  std::vector<SampleRow> rows;
  for (int i = 0; i < 20; ++i) {
    const double e_v = 3500.0 + i * 120.0;
    rows.push_back({"s" + std::to_string(i), e_v, 2.0 * e_v + 100.0});
  }
  rows.push_back({"incomplete", std::nullopt, 40000.0});
  const auto samples = d.path / "samples.csv";
  write_samples_csv(samples, rows);

  SUBCASE("exact line fits with R^2 = 1 in the model file") {
    std::ostringstream log;
    const auto model = d.path / "model.json";
    auto fit = run_fit(samples, 1, model, &log);
    CHECK(fit.n == 20);
    CHECK(log.str().find("incomplete") != std::string::npos);
    auto m = read_model_json(model);
    CHECK(m.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.model.coefficients[1] == doctest::Approx(2.0).epsilon(1e-9));
  }

  SUBCASE("predict streams a csv of evaluations") {
    FitReport fit;
    fit.model = {1, {-3205.553278, 8.850490}};
    fit.n = 60;
    const auto model = d.path / "eq1.json";
    write_model_json(model, fit);
    std::ostringstream out;
    run_predict(model, {5000.0, 0.0}, out);
    CHECK(out.str().find("41046.896722") != std::string::npos);
    CHECK(out.str().find("-3205.553278") != std::string::npos);
    CHECK(out.str().rfind("e_v_m3_ha,predicted_kg_ha\n", 0) == 0);
  }

  SUBCASE("report bundle: svg + summary, id join for cut samples") {
    const auto model = d.path / "model.json";
    run_fit(samples, 1, model);
    std::vector<ParcelMetrics> metrics(1);
    metrics[0] = {"r00c00", 100, 80, 18.24, 9.0, 4934.2,
                  VolumeMethod::column_height, false};
    const auto mpath = d.path / "metrics.csv";
    write_metrics_csv(mpath, metrics);
    // one sample without density that resolves through its parcel id
    rows.back() = {"r00c00_cut0", std::nullopt, 40000.0};
    write_samples_csv(samples, rows);

    std::ostringstream log;
    run_report(mpath, samples, model, d.path / "report", &log);
    const auto svg = slurp(d.path / "report" / "scatter.svg");
    CHECK(svg.rfind("<?xml", 0) == 0);
    std::size_t circles = 0, pos = 0;
    while ((pos = svg.find("<circle", pos)) != std::string::npos) {
      ++circles;
      pos += 7;
    }
    CHECK(circles == 21);  // 20 direct + 1 joined via parcel id
    const auto txt = slurp(d.path / "report" / "report.txt");
    CHECK(txt.find("r_squared") != std::string::npos);

    SUBCASE("byte-identical on rerun") {
      run_report(mpath, samples, model, d.path / "report2");
      CHECK(slurp(d.path / "report2" / "scatter.svg") == svg);
      CHECK(slurp(d.path / "report2" / "report.txt") == txt);
    }
  }
  unsetenv("CROPMAP_CREATED");
}
