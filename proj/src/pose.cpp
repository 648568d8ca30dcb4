#include "cropmap/pose.hpp"

#include <algorithm>
#include <cmath>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"

namespace cropmap {

Course gnss_course(const GnssFix& prev, const GnssFix& next,
                   double speed_floor, int forced_zone) {
  const double dt = next.t - prev.t;
  if (dt <= 0.0) throw DomainError("gnss_course: non-increasing timestamps");
  auto a = wgs84_to_utm(prev.position, forced_zone);
  auto b = wgs84_to_utm(next.position, forced_zone);
  const double de = b.easting - a.easting;
  const double dn = b.northing - a.northing;
  Course c;
  c.heading = std::atan2(de, dn);
  c.speed = std::hypot(de, dn) / dt;
  c.reliable = c.speed >= speed_floor;
  return c;
}

HeadingEkfState ekf_predict(const HeadingEkfState& s, double yaw_rate,
                            double dt, const HeadingNoise& q) {
  if (dt <= 0.0) throw DomainError("ekf_predict: dt must be positive");
  HeadingEkfState out;
  out.yaw = wrap_angle(s.yaw + (yaw_rate - s.gyro_bias) * dt);
  out.gyro_bias = s.gyro_bias;

  Eigen::Matrix2d F;
  F << 1.0, -dt, 0.0, 1.0;
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  Q(0, 0) = q.rate_var * dt;
  Q(1, 1) = q.bias_walk_var * dt;
  out.cov = F * s.cov * F.transpose() + Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());
  return out;
}

HeadingEkfState ekf_update(const HeadingEkfState& s, double measured_yaw,
                           double r) {
  if (r <= 0.0) throw DomainError("ekf_update: variance must be positive");
  const double innovation = wrap_angle(measured_yaw - s.yaw);
  const double S = s.cov(0, 0) + r;
  const Eigen::Vector2d K = s.cov.col(0) / S;

  HeadingEkfState out;
  out.yaw = wrap_angle(s.yaw + K(0) * innovation);
  out.gyro_bias = s.gyro_bias + K(1) * innovation;

  // Joseph form keeps the covariance positive definite.
  Eigen::Matrix2d IKH = Eigen::Matrix2d::Identity();
  IKH.col(0) -= K;
  out.cov = IKH * s.cov * IKH.transpose() + r * K * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());
  return out;
}

namespace {

struct LocalFix {
  double t;
  Eigen::Vector3d p;
};

Eigen::Vector3d interp_position(const std::vector<LocalFix>& fixes, double t,
                                double max_gap, bool* degraded) {
  auto it = std::lower_bound(
      fixes.begin(), fixes.end(), t,
      [](const LocalFix& f, double tt) { return f.t < tt; });
  if (it == fixes.begin()) {
    *degraded = false;
    return it->p;
  }
  if (it == fixes.end()) {
    *degraded = false;
    return fixes.back().p;
  }
  const LocalFix& hi = *it;
  const LocalFix& lo = *(it - 1);
  *degraded = (hi.t - lo.t) > max_gap;
  const double u = (t - lo.t) / (hi.t - lo.t);
  return lo.p + u * (hi.p - lo.p);
}

}  // namespace

PoseTrack estimate_track(const std::vector<ImuSample>& imu,
                         const std::vector<GnssFix>& gnss,
                         const RigConfig& /*rig*/, const LocalFrame& frame,
                         const FusionConfig& cfg) {
  if (imu.empty() || gnss.empty())
    throw DomainError("estimate_track: empty input stream");

  std::vector<LocalFix> fixes;
  fixes.reserve(gnss.size());
  for (const auto& g : gnss) {
    if (g.quality == FixQuality::standalone) continue;
    if (g.quality == FixQuality::rtk_float && !cfg.use_float_fixes) continue;
    fixes.push_back({g.t, to_local(wgs84_to_utm(g.position, cfg.utm_zone),
                                   frame)});
  }
  if (fixes.empty())
    throw DomainError("estimate_track: no usable GNSS fixes");

  const double t0 = std::max(imu.front().t, fixes.front().t);
  const double t1 = std::min(imu.back().t, fixes.back().t);
  if (t0 >= t1)
    throw DomainError("estimate_track: IMU and GNSS do not overlap in time");

  // Course observations from fix pairs separated by at least course_baseline;
  // each is timestamped at the segment midpoint.
  struct CourseObs {
    double t, yaw, var;
  };
  std::vector<CourseObs> course_obs;
  std::size_t anchor = 0;
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    const Eigen::Vector2d d =
        (fixes[i].p - fixes[anchor].p).head<2>();
    const double dist = d.norm();
    if (dist < cfg.course_baseline) continue;
    const double dt = fixes[i].t - fixes[anchor].t;
    const double speed = dist / dt;
    if (speed >= cfg.speed_floor) {
      const double course = std::atan2(d.x(), d.y());
      const double sigma = std::sqrt(2.0) * cfg.gnss_sigma / dist;
      course_obs.push_back({0.5 * (fixes[anchor].t + fixes[i].t),
                            wrap_angle(kPi / 2.0 - course),
                            sigma * sigma});
    }
    anchor = i;
  }

  HeadingEkfState ekf;
  ekf.yaw = course_obs.empty() ? 0.0 : course_obs.front().yaw;
  ekf.cov << cfg.init_yaw_var, 0.0, 0.0, cfg.init_bias_var;

  PoseTrack track;
  track.frame = frame;
  std::size_t next_obs = 0;
  double prev_t = t0;
  bool first = true;
  for (const auto& s : imu) {
    if (s.t < t0 || s.t > t1) continue;
    if (!first) {
      const double dt = s.t - prev_t;
      if (dt <= 0.0)
        throw DomainError("estimate_track: IMU timestamps not increasing");
      ekf = ekf_predict(ekf, s.yaw_rate, dt, cfg.noise);
    }
    while (next_obs < course_obs.size() && course_obs[next_obs].t <= s.t) {
      ekf = ekf_update(ekf, course_obs[next_obs].yaw, course_obs[next_obs].var);
      ++next_obs;
    }
    Pose p;
    p.t = s.t;
    p.roll = s.roll;
    p.pitch = s.pitch;
    p.yaw = ekf.yaw;
    p.position = interp_position(fixes, s.t, cfg.max_gap, &p.degraded);
    track.poses.push_back(p);
    prev_t = s.t;
    first = false;
  }
  if (track.poses.empty())
    throw DomainError("estimate_track: no IMU samples inside overlap");
  return track;
}

Pose interpolate_pose(const PoseTrack& track, double t) {
  const auto& ps = track.poses;
  if (ps.empty()) throw DomainError("interpolate_pose: empty track");
  if (t < ps.front().t || t > ps.back().t)
    throw DomainError("interpolate_pose: time outside track span");
  auto it = std::lower_bound(ps.begin(), ps.end(), t,
                             [](const Pose& p, double tt) { return p.t < tt; });
  if (it->t == t) return *it;
  const Pose& hi = *it;
  const Pose& lo = *(it - 1);
  const double u = (t - lo.t) / (hi.t - lo.t);
  Pose p;
  p.t = t;
  p.position = lo.position + u * (hi.position - lo.position);
  p.roll = lerp_angle(lo.roll, hi.roll, u);
  p.pitch = lerp_angle(lo.pitch, hi.pitch, u);
  p.yaw = lerp_angle(lo.yaw, hi.yaw, u);
  p.degraded = lo.degraded || hi.degraded;
  return p;
}

RigidTransform world_from_base(const Pose& p) {
  const Eigen::Matrix3d R =
      (Eigen::AngleAxisd(p.yaw, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(p.pitch, Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(p.roll, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  return {R, p.position};
}

RigidTransform base_to_sensor(const Pose& p, const RigConfig& rig) {
  return world_from_base(p).compose(rig.sensor_mount);
}

}  // namespace cropmap
