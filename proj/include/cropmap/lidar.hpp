#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "cropmap/pose.hpp"

namespace cropmap {

// 16-beam spinning LiDAR model. Defaults describe the class of sensor used
// on the rig: a -15..+15 degree elevation ladder in 2 degree steps, ~0.2
// degree azimuth resolution and 3 cm range noise.
struct LidarSpec {
  std::array<double, 16> channel_elevations;  // radians, strictly increasing
  double azimuth_step;                        // radians
  double range_sigma = 0.03;                  // meters
  double min_range = 0.4;                     // meters
  double max_range = 50.0;                    // meters
  double sweep_period = 0.1;                  // seconds per revolution

  static LidarSpec vlp16_like();
  void validate() const;  // throws DomainError
};

struct RawReturn {
  double t = 0.0;       // seconds
  int channel = 0;      // 0..15
  double azimuth = 0.0; // radians, [0, 2pi), sensor frame
  double range = 0.0;   // meters
};

// One sweep (at most a full revolution) of returns, ordered by time.
struct Scan {
  double sweep_start = 0.0;
  std::vector<RawReturn> returns;
};

// Beam direction in the sensor frame: x forward, azimuth clockwise when
// viewed from above (+az swings toward -y).
Eigen::Vector3d spherical_to_cartesian(const RawReturn& r,
                                       const LidarSpec& spec);

struct ProjectionStats {
  std::size_t scans_used = 0;
  std::size_t scans_skipped = 0;     // entirely outside the track span
  std::size_t returns_projected = 0;
  std::size_t returns_outside = 0;   // timestamp not covered by the track
  std::size_t returns_degraded = 0;  // pose flagged degraded, excluded
};

// Project a scan into the track's local frame with per-return pose lookup
// (motion compensation within the sweep).
std::vector<Eigen::Vector3d> project_scan(const Scan& s,
                                          const PoseTrack& track,
                                          const RigConfig& rig,
                                          const LidarSpec& spec,
                                          ProjectionStats* stats = nullptr);

}  // namespace cropmap
