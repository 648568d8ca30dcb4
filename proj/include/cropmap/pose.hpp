#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cropmap/geodesy.hpp"

namespace cropmap {

struct ImuSample {
  double t = 0.0;        // seconds, GPS time
  double roll = 0.0;     // radians
  double pitch = 0.0;    // radians
  double yaw_rate = 0.0; // radians/s, body z gyro
};

enum class FixQuality { rtk_fixed, rtk_float, standalone };

struct GnssFix {
  double t = 0.0;
  GeoPoint position;
  FixQuality quality = FixQuality::rtk_fixed;
};

// Rigid body transform, rotation kept orthonormal.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation,
            rotation * other.translation + translation};
  }
  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
};

// Sensor rig geometry. The base frame sits at the RTK antenna center;
// sensor_mount maps LiDAR-frame coordinates into the base frame.
struct RigConfig {
  double arm_length = 1.5;      // base frame to front-wheel-center, meters
  RigidTransform sensor_mount;  // base <- LiDAR
  double antenna_height = 2.0;  // meters above ground, informational
};

// Two-state heading filter: [yaw, gyro bias].
struct HeadingEkfState {
  double yaw = 0.0;        // radians, wrapped to (-pi, pi]
  double gyro_bias = 0.0;  // radians/s
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

struct HeadingNoise {
  double rate_var = 3.0e-6;   // (rad/s)^2 per Hz gyro rate noise (0.1 deg/s/sqrt(Hz))
  double bias_walk_var = 3.0e-8;  // (rad/s)^2 per s bias random walk (0.01 deg/s/sqrt(s))
};

struct Pose {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // local frame, meters
  double roll = 0.0, pitch = 0.0, yaw = 0.0;           // radians
  bool degraded = false;  // GNSS gap exceeded; mapping skips these by default
};

struct PoseTrack {
  std::vector<Pose> poses;  // strictly increasing t
  LocalFrame frame;
};

struct FusionConfig {
  HeadingNoise noise;
  double speed_floor = 0.3;        // m/s, below this the course is unreliable
  double course_baseline = 0.5;    // m, min displacement for a course estimate
  double gnss_sigma = 0.02;        // m, 1-sigma horizontal fix noise
  double max_gap = 0.5;            // s, larger GNSS gaps flag poses degraded
  double init_yaw_var = 1.0;       // rad^2
  double init_bias_var = 1.0e-4;   // (rad/s)^2
  bool use_float_fixes = true;     // accept rtk_float in addition to rtk_fixed
  int utm_zone = 32;               // dataset-wide forced zone
};

struct Course {
  double heading = 0.0;  // radians, 0 = grid north, clockwise positive
  double speed = 0.0;    // m/s
  bool reliable = false;
};

// Course over ground between two fixes. Heading is atan2(dE, dN).
Course gnss_course(const GnssFix& prev, const GnssFix& next,
                   double speed_floor = 0.3, int forced_zone = 32);

HeadingEkfState ekf_predict(const HeadingEkfState& s, double yaw_rate,
                            double dt, const HeadingNoise& q);
HeadingEkfState ekf_update(const HeadingEkfState& s, double measured_yaw,
                           double r);

// Fuse IMU and GNSS into one pose per IMU sample within the time overlap.
// Yaw follows the ENU math convention (0 = +x east, counterclockwise);
// compass courses are converted internally via yaw = pi/2 - course.
PoseTrack estimate_track(const std::vector<ImuSample>& imu,
                         const std::vector<GnssFix>& gnss,
                         const RigConfig& rig, const LocalFrame& frame,
                         const FusionConfig& cfg);

// Throws DomainError outside the track span; no extrapolation.
Pose interpolate_pose(const PoseTrack& track, double t);

// world <- LiDAR transform for one pose: Rz(yaw) Ry(pitch) Rx(roll) composed
// with the rig's sensor mount.
RigidTransform base_to_sensor(const Pose& p, const RigConfig& rig);

// world <- base transform only.
RigidTransform world_from_base(const Pose& p);

}  // namespace cropmap
