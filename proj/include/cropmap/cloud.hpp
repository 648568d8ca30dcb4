#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "cropmap/lidar.hpp"

namespace cropmap {

enum class PointLabel : std::uint8_t { unlabeled = 0, ground = 1, plant = 2 };

// Origin-relative point cloud. Coordinates are stored at single precision;
// the relative frame keeps them small enough for millimeter fidelity.
struct PointCloud {
  LocalFrame frame;
  std::vector<Eigen::Vector3f> points;
  std::vector<PointLabel> labels;  // same length as points

  std::size_t size() const { return points.size(); }
  void push(const Eigen::Vector3f& p,
            PointLabel l = PointLabel::unlabeled) {
    points.push_back(p);
    labels.push_back(l);
  }
};

// Raster of ground elevation over (x, y), cell-centered samples.
struct GroundModel {
  double x0 = 0.0, y0 = 0.0;  // lower-left corner of cell (0,0)
  double cell = 0.25;
  int nx = 0, ny = 0;
  std::vector<float> elevation;  // nx*ny, row-major by y
  std::vector<std::uint8_t> valid;

  std::optional<double> at(double x, double y) const;
};

struct GroundConfig {
  double cell = 0.25;       // meters
  double percentile = 0.05; // low elevation percentile per cell
  int min_count = 5;        // cells with fewer members are invalid
  double fill_radius = 2.0; // meters, nearest-valid fill for invalid cells
  // Cells whose low percentile sits more than reject_thresh above the lowest
  // cell within reject_radius are treated as canopy-occluded: invalidated and
  // later filled from true ground neighbors. Set reject_thresh <= 0 to
  // disable.
  double reject_thresh = 0.15;  // meters
  double reject_radius = 1.5;   // meters
};

struct AssembleStats {
  ProjectionStats projection;
  std::size_t total_points = 0;
};

// Concatenate projected scans into one cloud in the given frame. Scans are
// processed in sweep_start order so the output is permutation-stable.
PointCloud assemble(std::vector<Scan> scans, const PoseTrack& track,
                    const RigConfig& rig, const LidarSpec& spec,
                    const LocalFrame& frame, AssembleStats* stats = nullptr);

// One point per occupied voxel at the member centroid. Voxel indices are
// floor(coord/leaf), anchored at the frame origin. Labels propagate by
// majority; ties resolve to plant.
PointCloud voxel_downsample(const PointCloud& c, double leaf);

GroundModel estimate_ground(const PointCloud& c, const GroundConfig& cfg);

// plant iff z - ground > h_thresh, ground otherwise; unlabeled over invalid
// ground cells.
PointCloud segment(const PointCloud& c, const GroundModel& g, double h_thresh);

}  // namespace cropmap
