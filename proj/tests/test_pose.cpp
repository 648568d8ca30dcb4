#include <doctest.h>

#include <cmath>
#include <random>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"
#include "cropmap/pose.hpp"

using namespace cropmap;

namespace {

const LocalFrame kFrame{{32, true, 651524.0, 6133810.0, 40.0}, "test"};

GnssFix fix_at(double t, const Eigen::Vector3d& local) {
  GnssFix f;
  f.t = t;
  f.position = utm_to_wgs84(from_local(local, kFrame));
  return f;
}

}  // namespace

TEST_CASE("gnss course axis cases") {
  auto east = gnss_course(fix_at(0.0, {0, 0, 0}), fix_at(1.0, {5, 0, 0}));
  CHECK(east.heading == doctest::Approx(kPi / 2).epsilon(1e-6));
  CHECK(east.speed == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(east.reliable);

  auto north = gnss_course(fix_at(0.0, {0, 0, 0}), fix_at(1.0, {0, 5, 0}));
  CHECK(north.heading == doctest::Approx(0.0).scale(1).epsilon(1e-6));

  auto diag = gnss_course(fix_at(0.0, {0, 0, 0}), fix_at(1.0, {3, 4, 0}));
  CHECK(diag.heading == doctest::Approx(std::atan2(3.0, 4.0)).epsilon(1e-6));
  CHECK(diag.speed == doctest::Approx(5.0).epsilon(1e-6));

  auto slow = gnss_course(fix_at(0.0, {0, 0, 0}), fix_at(1.0, {0.1, 0, 0}));
  CHECK_FALSE(slow.reliable);

  CHECK_THROWS_AS(gnss_course(fix_at(1.0, {0, 0, 0}), fix_at(1.0, {1, 0, 0})),
                  DomainError);
}

TEST_CASE("ekf predict") {
  HeadingEkfState s;
  s.cov = Eigen::Matrix2d::Identity() * 0.01;
  HeadingNoise q;

  SUBCASE("bias cancellation") {
    s.gyro_bias = 0.2;
    auto out = ekf_predict(s, 0.2, 1.0, q);
    CHECK(out.yaw == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(out.cov.trace() > s.cov.trace());
  }
  SUBCASE("euler step") {
    auto out = ekf_predict(s, 0.1, 1.0, q);
    CHECK(out.yaw == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("trace grows under process noise") {
    auto out = s;
    for (int i = 0; i < 10; ++i) {
      auto next = ekf_predict(out, 0.0, 0.1, q);
      CHECK(next.cov.trace() > out.cov.trace());
      out = next;
    }
  }
  SUBCASE("rejects bad dt") {
    CHECK_THROWS_AS(ekf_predict(s, 0.0, 0.0, q), DomainError);
    CHECK_THROWS_AS(ekf_predict(s, 0.0, -0.1, q), DomainError);
  }
}

TEST_CASE("ekf update") {
  HeadingEkfState s;
  s.yaw = 0.5;
  s.cov = Eigen::Matrix2d::Identity() * 0.01;

  SUBCASE("zero innovation keeps yaw, shrinks covariance") {
    auto out = ekf_update(s, 0.5, 0.01);
    CHECK(out.yaw == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.cov(0, 0) < s.cov(0, 0));
  }
  SUBCASE("innovation wraps across pi") {
    s.yaw = 3.1;
    auto out = ekf_update(s, -3.1, 1e9);  // huge r: yaw barely moves
    // wrapped innovation is about -0.083, so yaw must not jump toward -3.1
    CHECK(std::abs(wrap_angle(out.yaw - 3.1)) < 0.01);
    auto strong = ekf_update(s, -3.1, 1e-9);  // tiny r: yaw snaps to measurement
    CHECK(std::abs(wrap_angle(strong.yaw - (-3.1))) < 0.01);
  }
  SUBCASE("rejects bad variance") {
    CHECK_THROWS_AS(ekf_update(s, 0.0, 0.0), DomainError);
  }
}

TEST_CASE("ekf covariance stays symmetric positive definite" *
          doctest::timeout(60)) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(-1.0, 1.0);
  std::uniform_real_distribution<double> dt(1e-3, 0.5);
  std::uniform_real_distribution<double> meas(-kPi, kPi);
  std::uniform_real_distribution<double> rvar(1e-6, 1.0);
  std::bernoulli_distribution do_update(0.3);
  HeadingNoise q;

  HeadingEkfState s;
  s.cov << 0.5, 0.0, 0.0, 1e-3;
  int failures = 0;
  for (int i = 0; i < 1000000; ++i) {
    s = ekf_predict(s, rate(rng), dt(rng), q);
    if (do_update(rng)) s = ekf_update(s, meas(rng), rvar(rng));
    const double asym = std::abs(s.cov(0, 1) - s.cov(1, 0));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s.cov);
    if (asym > 1e-15 || es.eigenvalues().minCoeff() <= 0.0) ++failures;
    if (std::abs(s.yaw) > kPi) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("simulated biased gyro: bias recovered within 10%") {
  // 0.5 deg/s constant gyro bias, true yaw follows a gentle S-curve, course
  // observations carry realistic noise from 2 cm fixes over 0.5 m baselines.
  const double bias_true = deg2rad(0.5);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> course_noise(0.0, 0.056);

  HeadingEkfState s;
  s.cov << 1.0, 0.0, 0.0, 1e-4;
  HeadingNoise q;
  double yaw_true = 0.0;
  const double dt = 0.01;
  double t = 0.0;
  for (int i = 0; i < 12000; ++i) {  // 120 s
    const double rate_true = 0.05 * std::sin(0.1 * t);
    yaw_true = wrap_angle(yaw_true + rate_true * dt);
    s = ekf_predict(s, rate_true + bias_true, dt, q);
    if (i % 50 == 0) {  // 2 Hz course observations
      s = ekf_update(s, wrap_angle(yaw_true + course_noise(rng)),
                     0.056 * 0.056);
    }
    t += dt;
  }
  CHECK(std::abs(s.gyro_bias - bias_true) < 0.1 * bias_true);
  CHECK(std::abs(wrap_angle(s.yaw - yaw_true)) < deg2rad(1.0));
}

TEST_CASE("interpolate pose") {
  PoseTrack track;
  track.frame = kFrame;
  Pose a;
  a.t = 0.0;
  a.position = {0, 0, 0};
  a.yaw = deg2rad(170.0);
  Pose b;
  b.t = 2.0;
  b.position = {4, 2, 0};
  b.yaw = deg2rad(-170.0);
  track.poses = {a, b};

  SUBCASE("exact sample returned") {
    auto p = interpolate_pose(track, 0.0);
    CHECK(p.yaw == a.yaw);
    CHECK(p.position == a.position);
  }
  SUBCASE("midpoint position is arithmetic mean") {
    auto p = interpolate_pose(track, 1.0);
    CHECK(p.position.isApprox(Eigen::Vector3d(2, 1, 0)));
  }
  SUBCASE("yaw interpolates along the shortest arc") {
    auto p = interpolate_pose(track, 1.0);
    CHECK(std::abs(wrap_angle(p.yaw - kPi)) < 1e-12);
  }
  SUBCASE("no extrapolation") {
    CHECK_THROWS_AS(interpolate_pose(track, -0.1), DomainError);
    CHECK_THROWS_AS(interpolate_pose(track, 2.1), DomainError);
  }
  SUBCASE("angle interpolation is offset equivariant") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int i = 0; i < 200; ++i) {
      const double off = ang(rng);
      PoseTrack shifted = track;
      shifted.poses[0].yaw = wrap_angle(a.yaw + off);
      shifted.poses[1].yaw = wrap_angle(b.yaw + off);
      const double u = 0.37;
      auto p0 = interpolate_pose(track, u * 2.0);
      auto p1 = interpolate_pose(shifted, u * 2.0);
      CHECK(std::abs(wrap_angle(p1.yaw - p0.yaw - off)) < 1e-12);
    }
  }
}

TEST_CASE("base_to_sensor composition") {
  RigConfig rig;

  SUBCASE("identity pose, identity mount") {
    Pose p;
    auto T = base_to_sensor(p, rig);
    CHECK(T.rotation.isApprox(Eigen::Matrix3d::Identity()));
    CHECK(T.translation.isZero());
  }
  SUBCASE("yaw pi/2 maps body x to world y") {
    Pose p;
    p.yaw = kPi / 2;
    auto T = base_to_sensor(p, rig);
    CHECK(T.apply(Eigen::Vector3d::UnitX())
              .isApprox(Eigen::Vector3d::UnitY(), 1e-12));
  }
  SUBCASE("mount composition matches direct chain") {
    Pose p;
    p.t = 0;
    p.position = {1.0, -2.0, 0.5};
    p.roll = 0.1;
    p.pitch = -0.2;
    p.yaw = 1.3;
    rig.sensor_mount.rotation =
        Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitY())
            .toRotationMatrix();
    rig.sensor_mount.translation = {0.4, 0.0, 0.3};
    auto T = base_to_sensor(p, rig);
    Eigen::Vector3d x{0.2, 0.7, -0.1};
    auto direct = world_from_base(p).apply(rig.sensor_mount.apply(x));
    CHECK((T.apply(x) - direct).norm() < 1e-12);
  }
  SUBCASE("rigid transform group laws") {
    RigidTransform T1{Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitZ())
                          .toRotationMatrix(),
                      {1, 2, 3}};
    auto I = T1.compose(T1.inverse());
    CHECK(I.rotation.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    CHECK(I.translation.norm() < 1e-12);
  }
}

TEST_CASE("estimate_track fuses straight east drive") {
  // 1 m/s east, bias-free gyro, zero noise.
  std::vector<ImuSample> imu;
  std::vector<GnssFix> gnss;
  for (int i = 0; i <= 3000; ++i) {
    imu.push_back({i * 0.01, 0.0, 0.0, 0.0});
  }
  for (int i = 0; i <= 300; ++i) {
    gnss.push_back(fix_at(i * 0.1, {i * 0.1, 0.0, 0.0}));
  }
  FusionConfig cfg;
  auto track = estimate_track(imu, gnss, RigConfig{}, kFrame, cfg);
  REQUIRE(track.poses.size() > 1000);
  // after convergence yaw should be ~0 (east in the ENU math convention)
  for (std::size_t i = track.poses.size() / 2; i < track.poses.size(); ++i) {
    CHECK(std::abs(track.poses[i].yaw) < deg2rad(1.0));
  }
  // positions follow the drive
  auto p = interpolate_pose(track, 15.0);
  CHECK((p.position - Eigen::Vector3d(15.0, 0.0, 0.0)).norm() < 1e-6);
}

TEST_CASE("estimate_track flags GNSS gaps degraded") {
  std::vector<ImuSample> imu;
  std::vector<GnssFix> gnss;
  for (int i = 0; i <= 2000; ++i) imu.push_back({i * 0.01, 0.0, 0.0, 0.0});
  for (int i = 0; i <= 200; ++i) {
    const double t = i * 0.1;
    if (t > 8.0 && t < 12.0) continue;  // 4 s dropout
    gnss.push_back(fix_at(t, {t, 0.0, 0.0}));
  }
  FusionConfig cfg;
  auto track = estimate_track(imu, gnss, RigConfig{}, kFrame, cfg);
  int degraded = 0;
  for (const auto& p : track.poses) {
    if (p.t > 8.1 && p.t < 11.9) CHECK(p.degraded);
    degraded += p.degraded;
  }
  CHECK(degraded > 300);
}

TEST_CASE("estimate_track rejects disjoint streams") {
  std::vector<ImuSample> imu{{0.0, 0, 0, 0}, {1.0, 0, 0, 0}};
  std::vector<GnssFix> gnss{fix_at(5.0, {0, 0, 0}), fix_at(6.0, {1, 0, 0})};
  CHECK_THROWS_AS(estimate_track(imu, gnss, RigConfig{}, kFrame, FusionConfig{}),
                  DomainError);
}

TEST_CASE("stationary vehicle: yaw evolves by prediction only") {
  std::vector<ImuSample> imu;
  std::vector<GnssFix> gnss;
  for (int i = 0; i <= 1000; ++i) imu.push_back({i * 0.01, 0.0, 0.0, 0.0});
  for (int i = 0; i <= 100; ++i) gnss.push_back(fix_at(i * 0.1, {0, 0, 0}));
  auto track = estimate_track(imu, gnss, RigConfig{}, kFrame, FusionConfig{});
  // no course observations -> yaw stays at its initial value
  for (const auto& p : track.poses) CHECK(p.yaw == 0.0);
}
