#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cropmap/biomass.hpp"
#include "cropmap/cloud.hpp"
#include "cropmap/parcels.hpp"

namespace cropmap {

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

// Write the whole file through a temp-and-rename so readers never observe a
// partial file. Throws IoError.
void atomic_write(const std::filesystem::path& path, const std::string& data);

std::string read_file(const std::filesystem::path& path);  // throws IoError

// `created` stamp for generated documents; the CROPMAP_CREATED environment
// variable overrides the clock so runs can be made byte-reproducible.
std::string created_stamp();

// --- CSV streams ------------------------------------------------------------
// All CSVs: LF newlines, required exact header, float64 via format_double.
// Parse errors name the row and column. Readers throw SchemaError/IoError.

void write_imu_csv(const std::filesystem::path& p,
                   const std::vector<ImuSample>& samples);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& p);

void write_gnss_csv(const std::filesystem::path& p,
                    const std::vector<GnssFix>& fixes);
std::vector<GnssFix> read_gnss_csv(const std::filesystem::path& p);

void write_corners_csv(const std::filesystem::path& p,
                       const std::vector<BoundaryRecord>& records);
std::vector<BoundaryRecord> read_corners_csv(const std::filesystem::path& p);

struct SampleRow {
  std::string id;
  std::optional<double> e_v_m3_ha;  // empty field when absent
  double biomass_kg_ha = 0.0;
};
void write_samples_csv(const std::filesystem::path& p,
                       const std::vector<SampleRow>& rows);
std::vector<SampleRow> read_samples_csv(const std::filesystem::path& p);

struct TruthRow {
  std::string id;
  double volume_m3 = 0.0;
  double e_v_m3_ha = 0.0;
};
void write_truth_csv(const std::filesystem::path& p,
                     const std::vector<TruthRow>& rows);
std::vector<TruthRow> read_truth_csv(const std::filesystem::path& p);

void write_metrics_csv(const std::filesystem::path& p,
                       const std::vector<ParcelMetrics>& rows);
std::vector<ParcelMetrics> read_metrics_csv(const std::filesystem::path& p);

// --- scans.bin --------------------------------------------------------------
// "CMSCAN01" magic, then per sweep: {float64 sweep_start, uint32 n} followed
// by n x {float64 t, uint8 channel, float32 azimuth_rad, float32 range_m},
// all little-endian.
void write_scans(const std::filesystem::path& p,
                 const std::vector<Scan>& scans);
std::vector<Scan> read_scans(const std::filesystem::path& p);

// --- point cloud ------------------------------------------------------------
// Binary little-endian PLY: float32 x/y/z + uchar label, with
// origin_utm_zone/easting/northing/alt comments carrying the local frame.
void write_ply(const std::filesystem::path& p, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& p);

// --- model JSON -------------------------------------------------------------
void write_model_json(const std::filesystem::path& p, const FitReport& fit);
struct ModelFile {
  PolyModel model;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::string created;
};
ModelFile read_model_json(const std::filesystem::path& p);

// --- report -----------------------------------------------------------------
// Fig-style scatter of samples with fitted curve overlays; valid
// standalone XML.
void write_scatter_svg(const std::filesystem::path& p,
                       const std::vector<Sample>& samples,
                       const std::vector<PolyModel>& models);

}  // namespace cropmap
