#include "cropmap/lidar.hpp"

#include <cmath>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"

namespace cropmap {

LidarSpec LidarSpec::vlp16_like() {
  LidarSpec s;
  for (int i = 0; i < 16; ++i) {
    s.channel_elevations[i] = deg2rad(-15.0 + 2.0 * i);
  }
  s.azimuth_step = deg2rad(0.2);
  return s;
}

void LidarSpec::validate() const {
  for (int i = 1; i < 16; ++i) {
    if (channel_elevations[i] <= channel_elevations[i - 1])
      throw DomainError("LidarSpec: channel elevations must increase");
  }
  if (azimuth_step <= 0.0) throw DomainError("LidarSpec: azimuth_step <= 0");
  if (!(0.0 < min_range && min_range < max_range))
    throw DomainError("LidarSpec: need 0 < min_range < max_range");
  if (sweep_period <= 0.0) throw DomainError("LidarSpec: sweep_period <= 0");
  if (range_sigma < 0.0) throw DomainError("LidarSpec: range_sigma < 0");
}

Eigen::Vector3d spherical_to_cartesian(const RawReturn& r,
                                       const LidarSpec& spec) {
  if (r.channel < 0 || r.channel >= 16)
    throw DomainError("unknown LiDAR channel " + std::to_string(r.channel));
  const double elev = spec.channel_elevations[r.channel];
  const double ce = std::cos(elev);
  return {r.range * ce * std::cos(r.azimuth),
          -r.range * ce * std::sin(r.azimuth),
          r.range * std::sin(elev)};
}

std::vector<Eigen::Vector3d> project_scan(const Scan& s,
                                          const PoseTrack& track,
                                          const RigConfig& rig,
                                          const LidarSpec& spec,
                                          ProjectionStats* stats) {
  std::vector<Eigen::Vector3d> out;
  if (track.poses.empty()) throw DomainError("project_scan: empty track");
  const double t0 = track.poses.front().t;
  const double t1 = track.poses.back().t;

  std::size_t covered = 0;
  for (const auto& r : s.returns) {
    if (r.t >= t0 && r.t <= t1) ++covered;
  }
  if (covered == 0) {
    if (stats) ++stats->scans_skipped;
    return out;
  }
  if (stats) ++stats->scans_used;

  out.reserve(covered);
  for (const auto& r : s.returns) {
    if (r.t < t0 || r.t > t1) {
      if (stats) ++stats->returns_outside;
      continue;
    }
    const Pose p = interpolate_pose(track, r.t);
    if (p.degraded) {
      if (stats) ++stats->returns_degraded;
      continue;
    }
    out.push_back(base_to_sensor(p, rig).apply(spherical_to_cartesian(r, spec)));
    if (stats) ++stats->returns_projected;
  }
  return out;
}

}  // namespace cropmap
