#pragma once

#include <array>
#include <filesystem>

#include "cropmap/cloud.hpp"
#include "cropmap/fieldsim.hpp"
#include "cropmap/parcels.hpp"

namespace cropmap {

struct CloudParams {
  double voxel_leaf = 0.05;       // m, assembly downsample
  GroundConfig ground;
  double segment_h_thresh = 0.10; // m, plant/soil height split
};

struct BiomassParams {
  int order = 1;                 // default fit order
  double noise_sigma = 6240.0;   // kg/ha, simulator biomass noise (R^2 ~ 0.55)
};

// Full run configuration; the JSON schema mirrors this struct section by
// section and rejects unknown keys.
struct RunConfig {
  RigConfig rig;
  std::array<double, 3> mount_rpy_deg{0.0, 90.0, 0.0};  // nadir fan
  std::array<double, 3> mount_xyz_m{0.0, 0.0, 0.0};
  LidarSpec lidar;
  FusionConfig fusion;
  CloudParams cloud;
  VolumeConfig parcels;
  BiomassParams biomass;
  SimConfig sim;

  RunConfig();
  // Rebuild rig.sensor_mount from mount_rpy_deg / mount_xyz_m and mirror the
  // shared rig/lidar sections into the simulator config.
  void finalize();
};

RunConfig load_config(const std::filesystem::path& p);  // throws SchemaError
void write_config(const std::filesystem::path& p, const RunConfig& c);

}  // namespace cropmap
