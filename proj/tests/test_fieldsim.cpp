#include <doctest.h>

#include <cmath>
#include <map>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"
#include "cropmap/fieldsim.hpp"

using namespace cropmap;

namespace {

FieldSpec single_parcel() {
  FieldSpec f;
  f.parcel_rows = 1;
  f.parcel_cols = 1;
  f.canopy_heights = {0.5};
  f.margin = 2.0;
  return f;
}

// elevation ladder that includes a straight-down beam (channel 8 at 0 deg)
LidarSpec test_spec(double az_step_deg = 2.0) {
  LidarSpec s = LidarSpec::vlp16_like();
  for (int i = 0; i < 16; ++i)
    s.channel_elevations[i] = deg2rad(2.0 * (i - 8));
  s.azimuth_step = deg2rad(az_step_deg);
  s.range_sigma = 0.0;
  return s;
}

}  // namespace

TEST_CASE("heightfield construction") {
  SUBCASE("zero canopy -> surface equals soil") {
    FieldSpec f = single_parcel();
    f.canopy_heights = {0.0};
    f.soil_poly = {0.1, 0.01, -0.005, 0, 0, 0};
    auto hf = build_heightfield(f, 0.05);
    for (std::size_t i = 0; i < hf.surface.size(); ++i) {
      CHECK(hf.surface[i] == hf.soil[i]);
      CHECK(hf.plant[i] == 0);
    }
  }

  SUBCASE("surface never below soil; plant label consistent") {
    FieldSpec f = single_parcel();
    auto hf = build_heightfield(f, 0.05);
    for (std::size_t i = 0; i < hf.surface.size(); ++i) {
      CHECK(hf.surface[i] >= hf.soil[i]);
      CHECK(hf.plant[i] == (hf.surface[i] > hf.soil[i] ? 1 : 0));
    }
  }

  SUBCASE("full-footprint canopy integrates to the box volume") {
    FieldSpec f = single_parcel();
    f.stripe_width = 0.12;  // stripes merge into full coverage
    auto hf = build_heightfield(f, 0.03);
    double vol = 0.0;
    for (std::size_t i = 0; i < hf.surface.size(); ++i)
      vol += (double(hf.surface[i]) - double(hf.soil[i])) * hf.cell * hf.cell;
    CHECK(vol == doctest::Approx(2.28 * 8.0 * 0.5).epsilon(0.02));
  }

  SUBCASE("striped parcel matches closed-form coverage") {
    FieldSpec f = single_parcel();
    auto hf = build_heightfield(f, 0.01);
    double vol = 0.0;
    for (std::size_t i = 0; i < hf.surface.size(); ++i)
      vol += (double(hf.surface[i]) - double(hf.soil[i])) * hf.cell * hf.cell;
    const double truth = 19 * 0.06 * 8.0 * 0.5;  // covered area x height
    CHECK(vol == doctest::Approx(truth).epsilon(0.02));
  }

  SUBCASE("cell too coarse rejected") {
    FieldSpec f = single_parcel();
    CHECK_THROWS_AS(build_heightfield(f, 0.10), DomainError);
  }
}

TEST_CASE("ground truth volumes") {
  SUBCASE("uniform half-meter canopy over the footprint -> 5000 m3/ha") {
    FieldSpec f = single_parcel();
    f.stripe_width = 0.12;
    auto gt = ground_truth(f);
    REQUIRE(gt.size() == 1);
    CHECK(gt[0].e_v_m3_per_ha == doctest::Approx(5000.0).epsilon(1e-9));
    CHECK(gt[0].volume_m3 == doctest::Approx(9.12).epsilon(1e-9));
  }
  SUBCASE("70% coverage at 0.6 m -> 4200 m3/ha") {
    FieldSpec f = single_parcel();
    f.canopy_heights = {0.6};
    f.stripe_width = 0.7 * 2.28 / 19.0;
    auto gt = ground_truth(f);
    CHECK(gt[0].e_v_m3_per_ha == doctest::Approx(4200.0).epsilon(1e-9));
  }
  SUBCASE("zero canopy -> zero") {
    FieldSpec f = single_parcel();
    f.canopy_heights = {0.0};
    CHECK(ground_truth(f)[0].e_v_m3_per_ha == 0.0);
  }
  SUBCASE("default heights span the nominal density window") {
    FieldSpec f;
    f.parcel_rows = 2;
    f.parcel_cols = 5;
    assign_default_heights(f, 7);
    for (const auto& t : ground_truth(f)) {
      CHECK(t.e_v_m3_per_ha >= 3500.0);
      CHECK(t.e_v_m3_per_ha <= 6200.0);
    }
  }
  SUBCASE("corners round-trip to the local parcel footprint") {
    FieldSpec f = single_parcel();
    auto gt = ground_truth(f);
    const LocalFrame frame{f.origin, "sim"};
    const auto c0 = to_local(wgs84_to_utm(gt[0].corners[0], f.origin.zone),
                             frame);
    const auto c2 = to_local(wgs84_to_utm(gt[0].corners[2], f.origin.zone),
                             frame);
    CHECK(c0.x() == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(c2.x() == doctest::Approx(2.28).epsilon(1e-6));
    CHECK(c2.y() == doctest::Approx(8.0).epsilon(1e-6));
  }
}

TEST_CASE("trajectory streams") {
  FieldSpec f = single_parcel();
  TrajectorySpec t;
  t.pass_offsets_x = {-1.0, 3.3};
  t.gyro_bias = 0.0;
  t.gyro_sigma = 0.0;
  t.att_sigma = 0.0;
  t.gnss_sigma = 0.0;

  SUBCASE("zero noise -> streams exactly consistent with truth") {
    auto s = simulate_trajectory(t, f, 5);
    REQUIRE(!s.truth.poses.empty());
    REQUIRE(s.imu.size() == s.truth.poses.size());
    TruthMotion motion(t, f);
    for (std::size_t i = 0; i < s.imu.size(); ++i) {
      CHECK(s.imu[i].yaw_rate ==
            doctest::Approx(motion.yaw_rate_at(s.imu[i].t)).epsilon(1e-12));
      CHECK(s.imu[i].roll == 0.0);
    }
    const LocalFrame frame{f.origin, "sim"};
    for (const auto& fix : s.gnss) {
      const auto p = to_local(wgs84_to_utm(fix.position, f.origin.zone), frame);
      const Pose truth = motion.pose_at(fix.t);
      CHECK((p - truth.position).norm() < 1e-6);
    }
  }

  SUBCASE("straight pass at 1 m/s -> fixes 1/gnss_rate apart") {
    auto s = simulate_trajectory(t, f, 5);
    // first pass runs from -y_margin for (block_length + 2*y_margin) meters
    const double pass_t1 = t.t0 + (8.0 + 2.0 * t.y_margin) / t.speed;
    const LocalFrame frame{f.origin, "sim"};
    for (std::size_t i = 1; i < s.gnss.size(); ++i) {
      if (s.gnss[i].t >= pass_t1) break;
      const auto a =
          to_local(wgs84_to_utm(s.gnss[i - 1].position, f.origin.zone), frame);
      const auto b =
          to_local(wgs84_to_utm(s.gnss[i].position, f.origin.zone), frame);
      CHECK((b - a).head<2>().norm() ==
            doctest::Approx(t.speed / t.gnss_rate).epsilon(1e-6));
    }
  }

  SUBCASE("yaw follows the drive direction") {
    TruthMotion motion(t, f);
    const Pose up = motion.pose_at(t.t0 + 1.0);
    CHECK(up.yaw == doctest::Approx(kPi / 2.0));
    // after the turn the second pass runs -y
    const Pose down = motion.pose_at(motion.t_end() - 1.0);
    CHECK(down.yaw == doctest::Approx(-kPi / 2.0));
  }
}

TEST_CASE("raycast geometry") {
  FieldSpec f = single_parcel();
  f.canopy_heights = {0.0};
  auto hf = build_heightfield(f, 0.05);

  SUBCASE("straight down from 2 m") {
    const double r = raycast(hf, {1.0, 4.0, 2.0}, {0.0, 0.0, -1.0}, 0.1, 50.0);
    CHECK(r == doctest::Approx(2.0).epsilon(1e-4));
  }
  SUBCASE("45 degree incidence") {
    const Eigen::Vector3d d =
        Eigen::Vector3d(1.0, 0.0, -1.0).normalized();
    const double r = raycast(hf, {1.0, 4.0, 2.0}, d, 0.1, 50.0);
    CHECK(r == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-4));
  }
  SUBCASE("upward ray misses") {
    CHECK(raycast(hf, {1.0, 4.0, 2.0}, {0.0, 0.0, 1.0}, 0.1, 50.0) < 0.0);
  }
}

TEST_CASE("simulated scans") {
  FieldSpec f = single_parcel();
  f.canopy_heights = {0.0};
  auto hf = build_heightfield(f, 0.05);
  RigConfig rig;
  rig.sensor_mount = nadir_mount();
  Pose pose;
  pose.t = 10.0;
  pose.position = {1.14, 4.0, 2.0};
  pose.yaw = kPi / 2.0;

  SUBCASE("noise-free scan reconstructs the plane within 1e-4 m") {
    auto spec = test_spec(1.0);
    std::mt19937_64 rng(1);
    auto scan = simulate_scan(pose, spec, hf, rig, rng);
    CHECK(scan.returns.size() > 1000);
    const RigidTransform T = base_to_sensor(pose, rig);
    for (const auto& r : scan.returns) {
      const Eigen::Vector3d p =
          T.apply(spherical_to_cartesian(r, spec));
      CHECK(std::abs(p.z()) < 1e-4);
    }
  }

  SUBCASE("sensor below the surface rejected") {
    Pose low = pose;
    low.position.z() = -1.0;
    auto spec = test_spec();
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(simulate_scan(low, spec, hf, rig, rng), DomainError);
  }

  SUBCASE("range noise energy within 5% of sigma") {
    auto clean_spec = test_spec(0.5);
    auto noisy_spec = clean_spec;
    noisy_spec.range_sigma = 0.03;
    std::mt19937_64 rng(3);
    auto clean = simulate_scan(pose, clean_spec, hf, rig, rng);
    std::map<std::pair<int, int>, double> truth;
    for (const auto& r : clean.returns)
      truth[{r.channel, int(std::lround(r.azimuth / clean_spec.azimuth_step))}] =
          r.range;
    double ss = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 40 && n < 120000; ++rep) {
      auto noisy = simulate_scan(pose, noisy_spec, hf, rig, rng);
      for (const auto& r : noisy.returns) {
        auto it = truth.find(
            {r.channel, int(std::lround(r.azimuth / noisy_spec.azimuth_step))});
        if (it == truth.end()) continue;
        const double d = r.range - it->second;
        ss += d * d;
        ++n;
      }
    }
    REQUIRE(n >= 100000);
    CHECK(std::sqrt(ss / double(n)) ==
          doctest::Approx(0.03).epsilon(0.05));
  }
}

TEST_CASE("bundle determinism") {
  SimConfig cfg;
  cfg.field = single_parcel();
  cfg.field.canopy_heights.clear();
  cfg.traj.pass_offsets_x = {-1.0, 3.3};
  cfg.traj.speed = 2.0;
  cfg.lidar = test_spec(3.0);
  cfg.lidar.range_sigma = 0.02;
  cfg.lidar.max_range = 12.0;
  cfg.hf_cell = 0.05;
  cfg.seed = 9;

  auto a = simulate(cfg);
  auto b = simulate(cfg);
  REQUIRE(a.scans.size() == b.scans.size());
  REQUIRE(!a.scans.empty());
  for (std::size_t i = 0; i < a.scans.size(); ++i) {
    REQUIRE(a.scans[i].returns.size() == b.scans[i].returns.size());
    for (std::size_t j = 0; j < a.scans[i].returns.size(); ++j) {
      CHECK(a.scans[i].returns[j].range == b.scans[i].returns[j].range);
      CHECK(a.scans[i].returns[j].t == b.scans[i].returns[j].t);
    }
  }
  REQUIRE(a.gnss.size() == b.gnss.size());
  for (std::size_t i = 0; i < a.gnss.size(); ++i)
    CHECK(a.gnss[i].position.lat_deg == b.gnss[i].position.lat_deg);
  REQUIRE(a.imu.size() == b.imu.size());
  for (std::size_t i = 0; i < a.imu.size(); ++i)
    CHECK(a.imu[i].yaw_rate == b.imu[i].yaw_rate);
  REQUIRE(a.cuts.size() == b.cuts.size());
  for (std::size_t i = 0; i < a.cuts.size(); ++i)
    CHECK(a.cuts[i].biomass_kg_ha == b.cuts[i].biomass_kg_ha);
  CHECK(a.truth_parcels.size() == 1);
  CHECK(a.corners.size() == 1);
}

TEST_CASE("default drive covers every parcel") {
  // full 4 x 21 trial-scale layout, coarse beam set to keep runtime in check
  SimConfig cfg;
  cfg.seed = 4;
  cfg.traj.speed = 1.5;
  cfg.lidar = test_spec(2.0);
  cfg.lidar.sweep_period = 0.2;
  cfg.lidar.max_range = 12.0;
  cfg.hf_cell = 0.05;
  cfg.cuts_per_parcel = 0;

  FieldSpec field = cfg.field;
  assign_default_heights(field, cfg.seed);
  auto hf = build_heightfield(field, cfg.hf_cell);
  hf.march_step = 0.05;

  const TrajectorySpec& t = cfg.traj;
  TruthMotion motion(t, field);
  std::map<std::string, std::size_t> plant_hits;
  std::mt19937_64 rng(1);
  const int n_az = int(std::lround(2.0 * kPi / cfg.lidar.azimuth_step));
  const double pitch_x = field.parcel_width + field.gap;
  const double pitch_y = field.parcel_length + field.gap;
  for (double t0 = motion.t_begin(); t0 + cfg.lidar.sweep_period <= motion.t_end();
       t0 += cfg.lidar.sweep_period) {
    const Pose p = motion.pose_at(t0);
    const RigidTransform T = base_to_sensor(p, cfg.rig);
    for (int j = 0; j < n_az; ++j) {
      for (int ch = 0; ch < 16; ++ch) {
        RawReturn r;
        r.channel = ch;
        r.azimuth = j * cfg.lidar.azimuth_step;
        r.range = 1.0;
        const Eigen::Vector3d d =
            T.rotation * spherical_to_cartesian(r, cfg.lidar);
        const double rho = raycast(hf, T.translation, d, cfg.lidar.min_range,
                                   cfg.lidar.max_range);
        if (rho < 0.0) continue;
        const Eigen::Vector3d hit = T.translation + rho * d;
        if (!hf.plant_at(hit.x(), hit.y())) continue;
        const int col = int(std::floor(hit.x() / pitch_x));
        const int row = int(std::floor(hit.y() / pitch_y));
        if (col < 0 || col >= field.parcel_cols || row < 0 ||
            row >= field.parcel_rows)
          continue;
        ++plant_hits[field.parcel_id(row, col)];
      }
    }
  }
  REQUIRE(plant_hits.size() == std::size_t(field.n_parcels()));
  for (int r = 0; r < field.parcel_rows; ++r)
    for (int c = 0; c < field.parcel_cols; ++c) {
      INFO(field.parcel_id(r, c));
      CHECK(plant_hits[field.parcel_id(r, c)] >= 500);
    }
}

TEST_CASE("regression samples track the reference line") {
  auto s = make_regression_samples(400, 3, 0.0);
  REQUIRE(s.size() == 400);
  for (const auto& x : s) {
    CHECK(x.e_v >= 3500.0);
    CHECK(x.e_v <= 6200.0);
    CHECK(x.b ==
          doctest::Approx(8.850490 * x.e_v - 3205.553278).epsilon(1e-12));
  }
  auto noisy = make_regression_samples(60, 3, 6240.0);
  auto fit = fit_poly(noisy, 1);
  CHECK(fit.r_squared > 0.2);
  CHECK(fit.r_squared < 0.9);
}
