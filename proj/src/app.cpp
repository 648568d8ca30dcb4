#include "cropmap/app.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "cropmap/errors.hpp"

namespace cropmap {

namespace fs = std::filesystem;

namespace {

void note(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << "\n";
}

}  // namespace

void run_simulate(const RunConfig& cfg, const fs::path& out_dir,
                  std::ostream* log) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const SimBundle b = simulate(cfg.sim);

  write_imu_csv(out_dir / "imu.csv", b.imu);
  write_gnss_csv(out_dir / "gnss.csv", b.gnss);
  write_scans(out_dir / "scans.bin", b.scans);
  write_corners_csv(out_dir / "corners.csv", b.corners);

  std::vector<TruthRow> truth;
  for (const auto& t : b.truth_parcels)
    truth.push_back({t.id, t.volume_m3, t.e_v_m3_per_ha});
  write_truth_csv(out_dir / "truth.csv", truth);

  std::vector<SampleRow> samples;
  for (const auto& c : b.cuts)
    samples.push_back({c.id, c.e_v_m3_per_ha, c.biomass_kg_ha});
  write_samples_csv(out_dir / "samples.csv", samples);

  std::size_t returns = 0;
  for (const auto& s : b.scans) returns += s.returns.size();
  note(log, "simulate: " + std::to_string(b.scans.size()) + " sweeps, " +
                std::to_string(returns) + " returns, " +
                std::to_string(b.truth_parcels.size()) + " parcels");
}

MapResult run_map(const RunConfig& cfg, const fs::path& in_dir,
                  const fs::path& out_cloud, std::ostream* log) {
  const auto imu = read_imu_csv(in_dir / "imu.csv");
  const auto gnss = read_gnss_csv(in_dir / "gnss.csv");
  const auto scans = read_scans(in_dir / "scans.bin");
  if (gnss.empty()) throw DomainError("map: GNSS stream is empty");
  if (imu.empty()) throw DomainError("map: IMU stream is empty");

  // anchor the working frame at the first fix, rounded to whole meters
  UtmCoord origin = wgs84_to_utm(gnss.front().position, cfg.fusion.utm_zone);
  origin.easting = std::floor(origin.easting);
  origin.northing = std::floor(origin.northing);
  origin.alt_m = std::floor(origin.alt_m);
  const LocalFrame frame{origin, "map"};

  const PoseTrack track = estimate_track(imu, gnss, cfg.rig, frame, cfg.fusion);
  if (track.poses.empty())
    throw DomainError("map: IMU and GNSS streams do not overlap");

  MapResult r;
  if (scans.empty()) {
    note(log, "map: warning: scan stream is empty, writing an empty cloud");
    r.cloud.frame = frame;
    write_ply(out_cloud, r.cloud);
    return r;
  }

  PointCloud assembled =
      assemble(scans, track, cfg.rig, cfg.lidar, frame, &r.stats);
  if (r.stats.projection.scans_used == 0)
    throw DomainError("map: no scan overlaps the pose track span");

  r.cloud = voxel_downsample(assembled, cfg.cloud.voxel_leaf);
  write_ply(out_cloud, r.cloud);
  note(log, "map: scans used " + std::to_string(r.stats.projection.scans_used) +
                ", skipped " + std::to_string(r.stats.projection.scans_skipped) +
                ", returns outside track " +
                std::to_string(r.stats.projection.returns_outside) +
                ", degraded-pose returns " +
                std::to_string(r.stats.projection.returns_degraded) +
                ", points written " + std::to_string(r.cloud.size()));
  return r;
}

std::vector<ParcelMetrics> run_volume(const RunConfig& cfg,
                                      const fs::path& cloud_ply,
                                      const fs::path& corners_csv,
                                      const fs::path& out_csv,
                                      std::ostream* log) {
  const PointCloud cloud = read_ply(cloud_ply);
  const auto records = read_corners_csv(corners_csv);

  const GroundModel ground = estimate_ground(cloud, cfg.cloud.ground);
  const PointCloud segmented =
      segment(cloud, ground, cfg.cloud.segment_h_thresh);

  LoadReport report;
  const LocalFrame frame{cloud.frame.origin, "map"};
  const auto boundaries =
      load_boundaries(records, frame, cfg.fusion.utm_zone, &report);
  for (const auto& r : report.rejected)
    note(log, "volume: warning: rejected boundary " + r);
  if (!records.empty() && boundaries.empty())
    throw DomainError("volume: every boundary record was invalid");

  auto metrics = batch_metrics(segmented, boundaries, ground, cfg.parcels);
  write_metrics_csv(out_csv, metrics);
  note(log, "volume: " + std::to_string(metrics.size()) + " parcels from " +
                std::to_string(cloud.size()) + " points");
  return metrics;
}

FitReport run_fit(const fs::path& samples_csv, int order,
                  const fs::path& out_model, std::ostream* log) {
  const auto rows = read_samples_csv(samples_csv);
  std::vector<Sample> samples;
  for (const auto& r : rows) {
    if (!r.e_v_m3_ha) {
      note(log, "fit: warning: skipping '" + r.id + "' (no volume density)");
      continue;
    }
    samples.push_back({*r.e_v_m3_ha, r.biomass_kg_ha, r.id});
  }
  FitReport fit = fit_poly(samples, order);
  write_model_json(out_model, fit);
  std::ostringstream ss;
  ss << "fit: order " << order << ", n " << fit.n << ", R^2 " << fit.r_squared;
  note(log, ss.str());
  return fit;
}

void run_predict(const fs::path& model_json, const std::vector<double>& e_v,
                 std::ostream& out) {
  const ModelFile m = read_model_json(model_json);
  out << "e_v_m3_ha,predicted_kg_ha\n";
  for (double v : e_v)
    out << format_double(v) << "," << format_double(predict(m.model, v))
        << "\n";
}

void run_report(const fs::path& metrics_csv, const fs::path& samples_csv,
                const fs::path& model_json, const fs::path& out_dir,
                std::ostream* log) {
  const auto metrics = read_metrics_csv(metrics_csv);
  const auto rows = read_samples_csv(samples_csv);
  const ModelFile m = read_model_json(model_json);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  std::vector<Sample> samples;
  for (const auto& r : rows) {
    double e_v;
    if (r.e_v_m3_ha) {
      e_v = *r.e_v_m3_ha;
    } else {
      // fall back to the measured density of the parcel the cut sits in
      const std::string parcel = r.id.substr(0, r.id.find("_cut"));
      auto it = std::find_if(metrics.begin(), metrics.end(),
                             [&](const ParcelMetrics& x) {
                               return x.id == parcel || x.id == r.id;
                             });
      if (it == metrics.end()) {
        note(log, "report: warning: no density for sample '" + r.id + "'");
        continue;
      }
      e_v = it->e_v_m3_per_ha;
    }
    samples.push_back({e_v, r.biomass_kg_ha, r.id});
  }
  write_scatter_svg(out_dir / "scatter.svg", samples, {m.model});

  std::ostringstream txt;
  txt << "model order: " << m.model.order << "\n";
  txt << "coefficients (ascending powers):";
  for (double c : m.model.coefficients) txt << " " << format_double(c);
  txt << "\n";
  txt << "r_squared: " << format_double(m.r_squared) << "\n";
  txt << "fit samples: " << m.n << "\n";
  txt << "plotted samples: " << samples.size() << "\n";
  const std::size_t sparse =
      std::count_if(samples.begin(), samples.end(),
                    [](const Sample& s) { return s.b < 30000.0; });
  txt << "samples below 30000 kg/ha: " << sparse << "\n";
  std::size_t low_conf = 0;
  txt << "low-confidence parcels:";
  for (const auto& p : metrics)
    if (p.low_confidence) {
      txt << " " << p.id;
      ++low_conf;
    }
  if (low_conf == 0) txt << " none";
  txt << "\n";
  txt << "parcel rows: " << metrics.size() << "\n";
  atomic_write(out_dir / "report.txt", txt.str());
  note(log, "report: wrote scatter.svg and report.txt (" +
                std::to_string(samples.size()) + " samples)");
}

}  // namespace cropmap
