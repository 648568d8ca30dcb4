#include "cropmap/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "cropmap/errors.hpp"

namespace cropmap {

std::optional<double> GroundModel::at(double x, double y) const {
  const int ix = static_cast<int>(std::floor((x - x0) / cell));
  const int iy = static_cast<int>(std::floor((y - y0) / cell));
  if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return std::nullopt;
  const std::size_t i = static_cast<std::size_t>(iy) * nx + ix;
  if (!valid[i]) return std::nullopt;
  return elevation[i];
}

PointCloud assemble(std::vector<Scan> scans, const PoseTrack& track,
                    const RigConfig& rig, const LidarSpec& spec,
                    const LocalFrame& frame, AssembleStats* stats) {
  if (track.frame.origin.zone != frame.origin.zone ||
      track.frame.origin.north != frame.origin.north) {
    throw DomainError("assemble: track frame does not match output frame");
  }
  std::sort(scans.begin(), scans.end(),
            [](const Scan& a, const Scan& b) {
              return a.sweep_start < b.sweep_start;
            });
  const Eigen::Vector3d shift{
      track.frame.origin.easting - frame.origin.easting,
      track.frame.origin.northing - frame.origin.northing,
      track.frame.origin.alt_m - frame.origin.alt_m};

  PointCloud cloud;
  cloud.frame = frame;
  ProjectionStats pstats;
  for (const auto& s : scans) {
    for (const auto& p : project_scan(s, track, rig, spec, &pstats)) {
      const Eigen::Vector3d q = p + shift;
      cloud.push(q.cast<float>());
    }
  }
  if (stats) {
    stats->projection = pstats;
    stats->total_points = cloud.size();
  }
  return cloud;
}

namespace {

using VoxelKey = std::tuple<int, int, int>;

VoxelKey voxel_of(const Eigen::Vector3f& p, double leaf) {
  return {static_cast<int>(std::floor(p.x() / leaf)),
          static_cast<int>(std::floor(p.y() / leaf)),
          static_cast<int>(std::floor(p.z() / leaf))};
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& c, double leaf) {
  if (leaf <= 0.0) throw DomainError("voxel_downsample: leaf must be > 0");
  struct Cell {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t count = 0;
    std::size_t label_counts[3] = {0, 0, 0};
  };
  // std::map keeps the output deterministically ordered by cell index.
  std::map<VoxelKey, Cell> cells;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    Cell& cell = cells[voxel_of(c.points[i], leaf)];
    cell.sum += c.points[i].cast<double>();
    ++cell.count;
    ++cell.label_counts[static_cast<int>(c.labels[i])];
  }

  PointCloud out;
  out.frame = c.frame;
  out.points.reserve(cells.size());
  out.labels.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    const Eigen::Vector3d centroid = cell.sum / double(cell.count);
    PointLabel label = PointLabel::unlabeled;
    const auto& lc = cell.label_counts;
    // majority, ties toward plant
    if (lc[2] >= lc[1] && lc[2] >= lc[0] && lc[2] > 0)
      label = PointLabel::plant;
    else if (lc[1] >= lc[0] && lc[1] > 0)
      label = PointLabel::ground;
    out.push(centroid.cast<float>(), label);
  }
  return out;
}

GroundModel estimate_ground(const PointCloud& c, const GroundConfig& cfg) {
  if (cfg.cell <= 0.0) throw DomainError("estimate_ground: cell must be > 0");
  if (!(cfg.percentile > 0.0 && cfg.percentile < 0.5))
    throw DomainError("estimate_ground: percentile must be in (0, 0.5)");

  GroundModel g;
  g.cell = cfg.cell;
  if (c.points.empty()) return g;

  float min_x = c.points[0].x(), max_x = min_x;
  float min_y = c.points[0].y(), max_y = min_y;
  for (const auto& p : c.points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  g.x0 = std::floor(min_x / cfg.cell) * cfg.cell;
  g.y0 = std::floor(min_y / cfg.cell) * cfg.cell;
  g.nx = static_cast<int>(std::floor((max_x - g.x0) / cfg.cell)) + 1;
  g.ny = static_cast<int>(std::floor((max_y - g.y0) / cfg.cell)) + 1;

  std::vector<std::vector<float>> members(
      static_cast<std::size_t>(g.nx) * g.ny);
  for (const auto& p : c.points) {
    const int ix = static_cast<int>(std::floor((p.x() - g.x0) / cfg.cell));
    const int iy = static_cast<int>(std::floor((p.y() - g.y0) / cfg.cell));
    if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny) continue;
    members[static_cast<std::size_t>(iy) * g.nx + ix].push_back(p.z());
  }

  std::vector<float> raw(members.size(), 0.0f);
  std::vector<std::uint8_t> raw_valid(members.size(), 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto& m = members[i];
    if (m.size() < static_cast<std::size_t>(cfg.min_count)) continue;
    const std::size_t k = static_cast<std::size_t>(
        std::floor(cfg.percentile * double(m.size() - 1)));
    std::nth_element(m.begin(), m.begin() + k, m.end());
    raw[i] = m[k];
    raw_valid[i] = 1;
  }

  // Cells well above the lowest surface in their neighborhood never saw the
  // soil (dense canopy); invalidate them so the fill stage takes over.
  if (cfg.reject_thresh > 0.0) {
    const int rr = static_cast<int>(std::ceil(cfg.reject_radius / cfg.cell));
    std::vector<std::uint8_t> keep = raw_valid;
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) {
        const std::size_t i = static_cast<std::size_t>(iy) * g.nx + ix;
        if (!raw_valid[i]) continue;
        float local_min = raw[i];
        for (int dy = -rr; dy <= rr; ++dy) {
          for (int dx = -rr; dx <= rr; ++dx) {
            const int jx = ix + dx, jy = iy + dy;
            if (jx < 0 || jy < 0 || jx >= g.nx || jy >= g.ny) continue;
            if (double(dx) * dx + double(dy) * dy >
                (cfg.reject_radius / cfg.cell) * (cfg.reject_radius / cfg.cell))
              continue;
            const std::size_t j = static_cast<std::size_t>(jy) * g.nx + jx;
            if (raw_valid[j]) local_min = std::min(local_min, raw[j]);
          }
        }
        if (raw[i] > local_min + cfg.reject_thresh) keep[i] = 0;
      }
    }
    raw_valid = std::move(keep);
  }

  // 3x3 median smoothing over valid cells
  g.elevation.assign(members.size(), 0.0f);
  g.valid.assign(members.size(), 0);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * g.nx + ix;
      if (!raw_valid[i]) continue;
      std::vector<float> window;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = ix + dx, jy = iy + dy;
          if (jx < 0 || jy < 0 || jx >= g.nx || jy >= g.ny) continue;
          const std::size_t j = static_cast<std::size_t>(jy) * g.nx + jx;
          if (raw_valid[j]) window.push_back(raw[j]);
        }
      }
      std::nth_element(window.begin(), window.begin() + window.size() / 2,
                       window.end());
      g.elevation[i] = window[window.size() / 2];
      g.valid[i] = 1;
    }
  }

  // fill invalid cells from the nearest valid cell within fill_radius
  const int max_ring = static_cast<int>(std::ceil(cfg.fill_radius / cfg.cell));
  std::vector<float> filled = g.elevation;
  std::vector<std::uint8_t> filled_valid = g.valid;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * g.nx + ix;
      if (g.valid[i]) continue;
      bool found = false;
      for (int ring = 1; ring <= max_ring && !found; ++ring) {
        float best = 0.0f;
        double best_d2 = 1e30;
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
            const int jx = ix + dx, jy = iy + dy;
            if (jx < 0 || jy < 0 || jx >= g.nx || jy >= g.ny) continue;
            const std::size_t j = static_cast<std::size_t>(jy) * g.nx + jx;
            if (!g.valid[j]) continue;
            const double d2 = double(dx) * dx + double(dy) * dy;
            if (d2 < best_d2) {
              best_d2 = d2;
              best = g.elevation[j];
            }
          }
        }
        if (best_d2 < 1e30 &&
            std::sqrt(best_d2) * cfg.cell <= cfg.fill_radius) {
          filled[i] = best;
          filled_valid[i] = 1;
          found = true;
        }
      }
    }
  }
  g.elevation = std::move(filled);
  g.valid = std::move(filled_valid);
  return g;
}

PointCloud segment(const PointCloud& c, const GroundModel& g,
                   double h_thresh) {
  PointCloud out = c;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    const auto& p = out.points[i];
    const auto ground = g.at(p.x(), p.y());
    if (!ground) {
      out.labels[i] = PointLabel::unlabeled;
    } else if (p.z() - *ground > h_thresh) {
      out.labels[i] = PointLabel::plant;
    } else {
      out.labels[i] = PointLabel::ground;
    }
  }
  return out;
}

}  // namespace cropmap
