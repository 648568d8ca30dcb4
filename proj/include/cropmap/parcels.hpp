#pragma once

#include <array>
#include <string>
#include <vector>

#include "cropmap/cloud.hpp"

namespace cropmap {

// Convex quad in the local frame, corners counterclockwise.
struct Quad {
  std::array<Eigen::Vector2d, 4> corners;

  double area() const;
  Eigen::Vector2d centroid() const;
  // Half-open membership: bottom/left edges inclusive, top/right exclusive,
  // so adjacent quads partition shared edges.
  bool contains(double x, double y) const;
};

struct ParcelBoundary {
  std::string id;
  std::array<GeoPoint, 4> corners_wgs84;  // as logged, any order
  Quad local;                             // derived, ccw
};

struct CutArea {
  std::string parcel_id;
  std::array<GeoPoint, 4> corners_wgs84;
  Quad local;
  double biomass_kg = -1.0;  // fresh biomass from the samples file, <0 if absent
};

enum class VolumeMethod { voxel_occupancy, column_height };

struct ParcelMetrics {
  std::string id;
  std::size_t n_points = 0;
  std::size_t n_plant_points = 0;
  double footprint_m2 = 0.0;
  double volume_m3 = 0.0;
  double e_v_m3_per_ha = 0.0;
  VolumeMethod method = VolumeMethod::voxel_occupancy;
  bool low_confidence = false;
};

struct VolumeConfig {
  double leaf = 0.05;                  // meters
  VolumeMethod method = VolumeMethod::voxel_occupancy;
  double invalid_ground_max = 0.25;    // flag low confidence above this fraction
  std::size_t min_plant_points = 50;   // flag low confidence below this count
};

// Sort four corners counterclockwise about their centroid. Throws DomainError
// for degenerate (collinear / zero-area / non-convex) corner sets.
Quad order_corners(const std::array<Eigen::Vector2d, 4>& pts);

struct BoundaryRecord {
  std::string id;
  std::array<GeoPoint, 4> corners;
};

struct LoadReport {
  std::vector<std::string> rejected;  // "<id>: <reason>" per bad record
};

std::vector<ParcelBoundary> load_boundaries(
    const std::vector<BoundaryRecord>& records, const LocalFrame& frame,
    int utm_zone, LoadReport* report = nullptr);

// Points whose (x, y) lie inside the polygon (half-open convention).
PointCloud clip(const PointCloud& c, const Quad& poly);

// Canopy volume of an already clipped, segmented cloud.
ParcelMetrics canopy_volume(const PointCloud& clipped, const GroundModel& g,
                            const Quad& poly, const VolumeConfig& cfg,
                            const std::string& id = "");

// One ParcelMetrics per boundary, ordered by id. Throws SchemaError on
// duplicate ids.
std::vector<ParcelMetrics> batch_metrics(const PointCloud& segmented,
                                         const std::vector<ParcelBoundary>& bs,
                                         const GroundModel& g,
                                         const VolumeConfig& cfg);

}  // namespace cropmap
