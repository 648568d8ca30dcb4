#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cropmap/config.hpp"
#include "cropmap/io.hpp"

namespace cropmap {

// Pipeline stages behind the command-line verbs. Each throws
// SchemaError/DomainError/IoError; the CLI maps those to exit codes.

// Emits imu.csv, gnss.csv, scans.bin, corners.csv, truth.csv, samples.csv.
void run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                  std::ostream* log = nullptr);

struct MapResult {
  PointCloud cloud;   // as written (downsampled)
  AssembleStats stats;
};

// imu.csv + gnss.csv + scans.bin in in_dir -> georeferenced PLY.
MapResult run_map(const RunConfig& cfg, const std::filesystem::path& in_dir,
                  const std::filesystem::path& out_cloud,
                  std::ostream* log = nullptr);

// PLY + corners.csv -> per-parcel metrics CSV.
std::vector<ParcelMetrics> run_volume(const RunConfig& cfg,
                                      const std::filesystem::path& cloud_ply,
                                      const std::filesystem::path& corners_csv,
                                      const std::filesystem::path& out_csv,
                                      std::ostream* log = nullptr);

// samples.csv -> model JSON; rows without e_v are skipped with a warning.
FitReport run_fit(const std::filesystem::path& samples_csv, int order,
                  const std::filesystem::path& out_model,
                  std::ostream* log = nullptr);

// model JSON + e_v values -> predictions CSV on `out`.
void run_predict(const std::filesystem::path& model_json,
                 const std::vector<double>& e_v, std::ostream& out);

// metrics + samples + model -> scatter SVG and plain-text summary in out_dir.
void run_report(const std::filesystem::path& metrics_csv,
                const std::filesystem::path& samples_csv,
                const std::filesystem::path& model_json,
                const std::filesystem::path& out_dir,
                std::ostream* log = nullptr);

}  // namespace cropmap
