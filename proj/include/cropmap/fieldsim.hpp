#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cropmap/biomass.hpp"
#include "cropmap/cloud.hpp"
#include "cropmap/parcels.hpp"

namespace cropmap {

// Synthetic trial field: a parcel_rows x parcel_cols grid of rectangular
// parcels, each seeded with evenly spaced crop rows running along the parcel
// length. Local x spans the columns, y the rows, origin at the lower-left
// parcel corner.
struct FieldSpec {
  int parcel_rows = 4;
  int parcel_cols = 21;
  double parcel_width = 2.28;   // m, along x
  double parcel_length = 8.0;   // m, along y
  double gap = 0.5;             // m, between adjacent parcels
  double crop_row_spacing = 0.12;  // m
  int crop_rows_per_parcel = 19;
  double stripe_width = 0.06;   // m, canopy stripe per crop row
  // One canopy height per parcel, row-major; fill with assign_default_heights.
  std::vector<double> canopy_heights;
  // Soil elevation c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2.
  std::array<double, 6> soil_poly{0, 0, 0, 0, 0, 0};
  UtmCoord origin{32, true, 651524.0, 6133810.0, 40.0};  // local (0,0,0) anchor
  double margin = 6.0;          // m, bare-soil apron around the parcel block

  int n_parcels() const { return parcel_rows * parcel_cols; }
  double block_width() const {
    return parcel_cols * parcel_width + (parcel_cols - 1) * gap;
  }
  double block_length() const {
    return parcel_rows * parcel_length + (parcel_rows - 1) * gap;
  }
  // Lower-left corner of parcel (row, col).
  Eigen::Vector2d parcel_min(int row, int col) const {
    return {col * (parcel_width + gap), row * (parcel_length + gap)};
  }
  double soil_at(double x, double y) const {
    const auto& c = soil_poly;
    return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y +
           c[5] * y * y;
  }
  std::string parcel_id(int row, int col) const;
  void validate() const;  // throws DomainError
};

// Canopy heights uniform in [0.70, 1.24] m: with the default half-covered
// stripes this spans volume densities of roughly 3500-6200 m3/ha.
void assign_default_heights(FieldSpec& f, std::uint64_t seed);

// Rasterized truth surface used by the ray caster.
struct Heightfield {
  double x0 = 0.0, y0 = 0.0;
  double cell = 0.03;
  int nx = 0, ny = 0;
  std::vector<float> surface;       // soil + canopy
  std::vector<float> soil;
  std::vector<std::uint8_t> plant;  // 1 where surface > soil
  double max_surface = 0.0;
  double march_step = 0.02;  // m, ray-march step
  int bisect_iters = 10;

  // Clamped lookup: the border soil continues flat beyond the raster.
  std::size_t index_at(double x, double y) const;
  double surface_at(double x, double y) const {
    return surface[index_at(x, y)];
  }
  bool plant_at(double x, double y) const { return plant[index_at(x, y)]; }
};

// cell must resolve the crop rows (cell <= crop_row_spacing / 2).
Heightfield build_heightfield(const FieldSpec& f, double cell);

// Serpentine drive: straight passes along y at the given x offsets, joined
// by semicircular turn arcs. Empty pass_offsets_x selects the default
// pattern: both sides of the block plus a pass over every fourth column.
struct TrajectorySpec {
  std::vector<double> pass_offsets_x;
  double speed = 1.0;          // m/s
  double sensor_height = 2.0;  // m, base origin above the soil
  double imu_rate = 100.0;     // Hz
  double gnss_rate = 10.0;     // Hz
  double y_margin = 4.0;       // m, overshoot past the block ends
  double t0 = 0.0;             // s, stream start time
  double gyro_bias = 0.003;    // rad/s, constant per run
  double gyro_sigma = 0.002;   // rad/s, white per-sample noise
  double att_sigma = 0.0005;   // rad, roll/pitch readout noise
  double gnss_sigma = 0.02;    // m, per-axis fix noise

  void validate() const;
};

// Analytic truth motion (piecewise lines and arcs).
class TruthMotion {
 public:
  TruthMotion(const TrajectorySpec& t, const FieldSpec& f);
  Pose pose_at(double t) const;       // roll = pitch = 0, z follows the soil
  double yaw_rate_at(double t) const;
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }

 private:
  struct Segment {
    double t0, t1;
    bool arc;
    // line: start xy + unit dir; arc: center, radius, start angle, ang. rate
    Eigen::Vector2d a, b;
    double radius = 0.0, ang0 = 0.0, ang_rate = 0.0;
  };
  std::vector<Segment> segments_;
  const FieldSpec* field_;
  double speed_, height_, t_begin_, t_end_;
};

struct TruthStreams {
  PoseTrack truth;
  std::vector<ImuSample> imu;
  std::vector<GnssFix> gnss;
};

TruthStreams simulate_trajectory(const TrajectorySpec& t, const FieldSpec& f,
                                 std::uint64_t seed);

// First surface intersection along origin + t*dir; returns the range or a
// negative value on miss. tmin/tmax in meters along the ray.
double raycast(const Heightfield& hf, const Eigen::Vector3d& origin,
               const Eigen::Vector3d& dir, double tmin, double tmax);

// Full-revolution sweep from a single pose (no motion distortion). Throws
// DomainError if the sensor sits below the surface.
Scan simulate_scan(const Pose& p, const LidarSpec& spec, const Heightfield& hf,
                   const RigConfig& rig, std::mt19937_64& rng);

struct ParcelTruth {
  std::string id;
  std::array<GeoPoint, 4> corners;
  double volume_m3 = 0.0;
  double e_v_m3_per_ha = 0.0;
};

// Closed-form canopy volume per parcel plus WGS84 corner export.
std::vector<ParcelTruth> ground_truth(const FieldSpec& f);

struct SimConfig {
  FieldSpec field;
  TrajectorySpec traj;
  LidarSpec lidar;
  RigConfig rig;             // mount defaults to nadir_mount()
  double hf_cell = 0.03;     // m
  std::uint64_t seed = 1;
  double biomass_sigma = 6240.0;  // kg/ha, tuned for R^2 ~ 0.55
  int cuts_per_parcel = 1;

  SimConfig();
};

// Sensor x axis pointing down, spin axis forward: the vertical scan fan used
// on the rig.
RigidTransform nadir_mount();

struct CutSample {
  std::string id;
  double e_v_m3_per_ha = 0.0;   // truth density at the cut
  double biomass_kg_ha = 0.0;   // synthetic fresh biomass
};

struct SimBundle {
  std::vector<ImuSample> imu;
  std::vector<GnssFix> gnss;
  std::vector<Scan> scans;
  PoseTrack truth;
  std::vector<ParcelTruth> truth_parcels;
  std::vector<BoundaryRecord> corners;
  std::vector<CutSample> cuts;
  LocalFrame frame;
};

// Deterministic for a given config: per-sweep counter-seeded RNG, so sweep
// generation order cannot change the output.
SimBundle simulate(const SimConfig& cfg);

// n regression samples from the linear reference model plus Gaussian noise,
// e_v uniform over the 3500-6200 m3/ha window.
std::vector<Sample> make_regression_samples(std::size_t n, std::uint64_t seed,
                                            double sigma);

}  // namespace cropmap
