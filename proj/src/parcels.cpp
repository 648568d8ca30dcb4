#include "cropmap/parcels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "cropmap/errors.hpp"

namespace cropmap {

double Quad::area() const {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = corners[i];
    const auto& b = corners[(i + 1) % 4];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

Eigen::Vector2d Quad::centroid() const {
  return (corners[0] + corners[1] + corners[2] + corners[3]) / 4.0;
}

bool Quad::contains(double x, double y) const {
  for (int i = 0; i < 4; ++i) {
    const auto& v1 = corners[i];
    const auto& v2 = corners[(i + 1) % 4];
    const double dx = v2.x() - v1.x();
    const double dy = v2.y() - v1.y();
    const double cross = dx * (y - v1.y()) - dy * (x - v1.x());
    if (cross < 0.0) return false;
    if (cross == 0.0) {
      // on the edge: bottom/left inclusive, top/right exclusive
      if (!(dy < 0.0 || (dy == 0.0 && dx > 0.0))) return false;
    }
  }
  return true;
}

Quad order_corners(const std::array<Eigen::Vector2d, 4>& pts) {
  Eigen::Vector2d c = (pts[0] + pts[1] + pts[2] + pts[3]) / 4.0;
  std::array<Eigen::Vector2d, 4> sorted = pts;
  std::sort(sorted.begin(), sorted.end(),
            [&c](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return std::atan2(a.y() - c.y(), a.x() - c.x()) <
                     std::atan2(b.y() - c.y(), b.x() - c.x());
            });
  Quad q{sorted};
  const double area = q.area();
  if (!(area > 1e-6)) throw DomainError("degenerate corner set (zero area)");
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d e1 = q.corners[(i + 1) % 4] - q.corners[i];
    const Eigen::Vector2d e2 = q.corners[(i + 2) % 4] - q.corners[(i + 1) % 4];
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    // relative tolerance tolerates sub-micrometer projection noise
    if (!(cross > 1e-8 * e1.norm() * e2.norm()))
      throw DomainError("degenerate corner set (collinear or non-convex)");
  }
  return q;
}

std::vector<ParcelBoundary> load_boundaries(
    const std::vector<BoundaryRecord>& records, const LocalFrame& frame,
    int utm_zone, LoadReport* report) {
  std::vector<ParcelBoundary> out;
  for (const auto& r : records) {
    try {
      std::array<Eigen::Vector2d, 4> local;
      for (int i = 0; i < 4; ++i) {
        const auto v = to_local(wgs84_to_utm(r.corners[i], utm_zone), frame);
        local[i] = v.head<2>();
      }
      ParcelBoundary b;
      b.id = r.id;
      b.corners_wgs84 = r.corners;
      b.local = order_corners(local);
      out.push_back(std::move(b));
    } catch (const DomainError& e) {
      if (report) report->rejected.push_back(r.id + ": " + e.what());
    }
  }
  return out;
}

PointCloud clip(const PointCloud& c, const Quad& poly) {
  PointCloud out;
  out.frame = c.frame;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (poly.contains(p.x(), p.y())) out.push(p, c.labels[i]);
  }
  return out;
}

ParcelMetrics canopy_volume(const PointCloud& clipped, const GroundModel& g,
                            const Quad& poly, const VolumeConfig& cfg,
                            const std::string& id) {
  if (cfg.leaf <= 0.0) throw DomainError("canopy_volume: leaf must be > 0");
  ParcelMetrics m;
  m.id = id;
  m.method = cfg.method;
  m.n_points = clipped.size();
  m.footprint_m2 = poly.area();

  if (cfg.method == VolumeMethod::voxel_occupancy) {
    std::set<std::tuple<int, int, int>> occupied;
    for (std::size_t i = 0; i < clipped.points.size(); ++i) {
      if (clipped.labels[i] != PointLabel::plant) continue;
      ++m.n_plant_points;
      const auto& p = clipped.points[i];
      occupied.insert({static_cast<int>(std::floor(p.x() / cfg.leaf)),
                       static_cast<int>(std::floor(p.y() / cfg.leaf)),
                       static_cast<int>(std::floor(p.z() / cfg.leaf))});
    }
    m.volume_m3 = double(occupied.size()) * cfg.leaf * cfg.leaf * cfg.leaf;
  } else {
    std::map<std::pair<int, int>, float> col_max;
    for (std::size_t i = 0; i < clipped.points.size(); ++i) {
      if (clipped.labels[i] != PointLabel::plant) continue;
      ++m.n_plant_points;
      const auto& p = clipped.points[i];
      const std::pair<int, int> key{
          static_cast<int>(std::floor(p.x() / cfg.leaf)),
          static_cast<int>(std::floor(p.y() / cfg.leaf))};
      auto [it, inserted] = col_max.try_emplace(key, p.z());
      if (!inserted) it->second = std::max(it->second, p.z());
    }
    std::size_t invalid_cols = 0;
    for (const auto& [key, zmax] : col_max) {
      const double cx = (key.first + 0.5) * cfg.leaf;
      const double cy = (key.second + 0.5) * cfg.leaf;
      const auto ground = g.at(cx, cy);
      if (!ground) {
        ++invalid_cols;
        continue;
      }
      const double h = double(zmax) - *ground;
      if (h > 0.0) m.volume_m3 += h * cfg.leaf * cfg.leaf;
    }
    if (!col_max.empty() &&
        double(invalid_cols) / double(col_max.size()) > cfg.invalid_ground_max)
      m.low_confidence = true;
  }

  if (m.n_plant_points < cfg.min_plant_points && m.n_plant_points > 0)
    m.low_confidence = true;
  m.e_v_m3_per_ha = m.footprint_m2 > 0.0
                        ? m.volume_m3 / m.footprint_m2 * 1e4
                        : 0.0;
  return m;
}

std::vector<ParcelMetrics> batch_metrics(const PointCloud& segmented,
                                         const std::vector<ParcelBoundary>& bs,
                                         const GroundModel& g,
                                         const VolumeConfig& cfg) {
  std::set<std::string> ids;
  for (const auto& b : bs) {
    if (!ids.insert(b.id).second)
      throw SchemaError("duplicate boundary id: " + b.id);
  }
  std::vector<const ParcelBoundary*> sorted;
  for (const auto& b : bs) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const ParcelBoundary* a, const ParcelBoundary* b) {
              return a->id < b->id;
            });
  std::vector<ParcelMetrics> out;
  out.reserve(sorted.size());
  for (const auto* b : sorted) {
    out.push_back(canopy_volume(clip(segmented, b->local), g, b->local, cfg,
                                b->id));
  }
  return out;
}

}  // namespace cropmap
