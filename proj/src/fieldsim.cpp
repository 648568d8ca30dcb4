#include "cropmap/fieldsim.hpp"

#include <algorithm>
#include <cmath>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"

namespace cropmap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr double kRefSlope = 8.850490;
constexpr double kRefIntercept = -3205.553278;

}  // namespace

std::string FieldSpec::parcel_id(int row, int col) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%02dc%02d", row, col);
  return buf;
}

void FieldSpec::validate() const {
  if (parcel_rows <= 0 || parcel_cols <= 0)
    throw DomainError("field: parcel grid must be non-empty");
  if (parcel_width <= 0.0 || parcel_length <= 0.0 || gap < 0.0 ||
      margin <= 0.0)
    throw DomainError("field: dimensions must be positive");
  if (crop_row_spacing <= 0.0 || crop_rows_per_parcel <= 0 ||
      stripe_width <= 0.0)
    throw DomainError("field: crop-row layout must be positive");
  if (!canopy_heights.empty()) {
    if (canopy_heights.size() != static_cast<std::size_t>(n_parcels()))
      throw DomainError("field: need one canopy height per parcel");
    for (double h : canopy_heights)
      if (!(h >= 0.0)) throw DomainError("field: canopy heights must be >= 0");
  }
}

void assign_default_heights(FieldSpec& f, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> h(0.70, 1.24);
  f.canopy_heights.resize(f.n_parcels());
  for (auto& v : f.canopy_heights) v = h(rng);
}

std::size_t Heightfield::index_at(double x, double y) const {
  int ix = static_cast<int>(std::floor((x - x0) / cell));
  int iy = static_cast<int>(std::floor((y - y0) / cell));
  ix = std::clamp(ix, 0, nx - 1);
  iy = std::clamp(iy, 0, ny - 1);
  return static_cast<std::size_t>(iy) * nx + ix;
}

Heightfield build_heightfield(const FieldSpec& f, double cell) {
  f.validate();
  if (f.canopy_heights.empty())
    throw DomainError("build_heightfield: canopy heights not assigned");
  if (!(cell > 0.0) || cell > f.crop_row_spacing / 2.0)
    throw DomainError("build_heightfield: cell must resolve the crop rows");

  Heightfield hf;
  hf.cell = cell;
  hf.x0 = -f.margin;
  hf.y0 = -f.margin;
  hf.nx = static_cast<int>(std::ceil((f.block_width() + 2.0 * f.margin) / cell));
  hf.ny =
      static_cast<int>(std::ceil((f.block_length() + 2.0 * f.margin) / cell));
  const std::size_t n = static_cast<std::size_t>(hf.nx) * hf.ny;
  hf.surface.resize(n);
  hf.soil.resize(n);
  hf.plant.assign(n, 0);

  const int rows = f.crop_rows_per_parcel;
  const double first_row_x =
      (f.parcel_width - (rows - 1) * f.crop_row_spacing) / 2.0;
  const double pitch_x = f.parcel_width + f.gap;
  const double pitch_y = f.parcel_length + f.gap;

  double max_s = -1e30;
  for (int iy = 0; iy < hf.ny; ++iy) {
    const double y = hf.y0 + (iy + 0.5) * cell;
    for (int ix = 0; ix < hf.nx; ++ix) {
      const double x = hf.x0 + (ix + 0.5) * cell;
      const double soil = f.soil_at(x, y);
      double canopy = 0.0;
      const int col = static_cast<int>(std::floor(x / pitch_x));
      const int row = static_cast<int>(std::floor(y / pitch_y));
      if (col >= 0 && col < f.parcel_cols && row >= 0 && row < f.parcel_rows) {
        const double lx = x - col * pitch_x;
        const double ly = y - row * pitch_y;
        if (lx <= f.parcel_width && ly <= f.parcel_length) {
          int k = static_cast<int>(
              std::lround((lx - first_row_x) / f.crop_row_spacing));
          k = std::clamp(k, 0, rows - 1);
          const double row_center = first_row_x + k * f.crop_row_spacing;
          if (std::abs(lx - row_center) <= f.stripe_width / 2.0)
            canopy = f.canopy_heights[static_cast<std::size_t>(row) *
                                          f.parcel_cols +
                                      col];
        }
      }
      const std::size_t i = static_cast<std::size_t>(iy) * hf.nx + ix;
      hf.soil[i] = static_cast<float>(soil);
      hf.surface[i] = static_cast<float>(soil + canopy);
      hf.plant[i] = canopy > 0.0 ? 1 : 0;
      max_s = std::max(max_s, soil + canopy);
    }
  }
  hf.max_surface = max_s;
  return hf;
}

void TrajectorySpec::validate() const {
  if (speed <= 0.0 || imu_rate <= 0.0 || gnss_rate <= 0.0)
    throw DomainError("trajectory: rates and speed must be positive");
  if (sensor_height <= 0.0)
    throw DomainError("trajectory: sensor height must be positive");
}

TruthMotion::TruthMotion(const TrajectorySpec& t, const FieldSpec& f)
    : field_(&f),
      speed_(t.speed),
      height_(t.sensor_height),
      t_begin_(t.t0),
      t_end_(t.t0) {
  t.validate();
  f.validate();
  std::vector<double> xs = t.pass_offsets_x;
  if (xs.empty()) {
    xs.push_back(-1.5);
    for (int c = 1; c < f.parcel_cols; c += 4)
      xs.push_back(c * (f.parcel_width + f.gap) + f.parcel_width / 2.0);
    xs.push_back(f.block_width() + 1.5);
  }
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] - xs[i - 1] < 1e-6)
      throw DomainError("trajectory: pass offsets must be distinct");

  const double y_lo = -t.y_margin;
  const double y_hi = f.block_length() + t.y_margin;
  const double v = t.speed;
  double clock = t.t0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool up = (i % 2 == 0);  // serpentine: first pass drives +y
    Segment line;
    line.arc = false;
    line.t0 = clock;
    line.t1 = clock + (y_hi - y_lo) / v;
    line.a = {xs[i], up ? y_lo : y_hi};
    line.b = {0.0, up ? 1.0 : -1.0};
    segments_.push_back(line);
    clock = line.t1;

    if (i + 1 < xs.size()) {
      const double r = (xs[i + 1] - xs[i]) / 2.0;
      Segment arc;
      arc.arc = true;
      arc.t0 = clock;
      arc.t1 = clock + kPi * r / v;
      arc.a = {(xs[i] + xs[i + 1]) / 2.0, up ? y_hi : y_lo};
      arc.radius = r;
      arc.ang0 = kPi;  // start on the left of the turn center
      // over the top turning clockwise after an up pass, under the bottom
      // counterclockwise after a down pass
      arc.ang_rate = (up ? -1.0 : 1.0) * v / r;
      segments_.push_back(arc);
      clock = arc.t1;
    }
  }
  t_end_ = clock;
}

Pose TruthMotion::pose_at(double t) const {
  if (t < t_begin_ - 1e-9 || t > t_end_ + 1e-9)
    throw DomainError("pose_at: time outside the drive");
  t = std::clamp(t, t_begin_, t_end_);
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t,
      [](double v, const Segment& s) { return v < s.t1; });
  if (it == segments_.end()) --it;
  const Segment& s = *it;
  const double dt = t - s.t0;

  Pose p;
  p.t = t;
  double x, y;
  if (!s.arc) {
    x = s.a.x() + s.b.x() * speed_ * dt;
    y = s.a.y() + s.b.y() * speed_ * dt;
    p.yaw = std::atan2(s.b.y(), s.b.x());
  } else {
    const double ang = s.ang0 + s.ang_rate * dt;
    x = s.a.x() + s.radius * std::cos(ang);
    y = s.a.y() + s.radius * std::sin(ang);
    p.yaw = wrap_angle(ang + (s.ang_rate > 0.0 ? kPi / 2.0 : -kPi / 2.0));
  }
  p.position = {x, y, field_->soil_at(x, y) + height_};
  return p;
}

double TruthMotion::yaw_rate_at(double t) const {
  t = std::clamp(t, t_begin_, t_end_);
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t,
      [](double v, const Segment& s) { return v < s.t1; });
  if (it == segments_.end()) --it;
  return it->arc ? it->ang_rate : 0.0;
}

TruthStreams simulate_trajectory(const TrajectorySpec& t, const FieldSpec& f,
                                 std::uint64_t seed) {
  TruthMotion motion(t, f);
  const LocalFrame frame{f.origin, "sim"};
  std::mt19937_64 rng(splitmix64(seed ^ 0x5151a5a5u));
  std::normal_distribution<double> gyro_noise(0.0, t.gyro_sigma);
  std::normal_distribution<double> att_noise(0.0, t.att_sigma);
  std::normal_distribution<double> pos_noise(0.0, t.gnss_sigma);

  TruthStreams out;
  out.truth.frame = frame;
  const double dt_imu = 1.0 / t.imu_rate;
  for (double tt = motion.t_begin(); tt <= motion.t_end() + 1e-9;
       tt += dt_imu) {
    const double ts = std::min(tt, motion.t_end());
    Pose p = motion.pose_at(ts);
    out.truth.poses.push_back(p);
    ImuSample s;
    s.t = ts;
    s.roll = p.roll + (t.att_sigma > 0.0 ? att_noise(rng) : 0.0);
    s.pitch = p.pitch + (t.att_sigma > 0.0 ? att_noise(rng) : 0.0);
    s.yaw_rate = motion.yaw_rate_at(ts) + t.gyro_bias +
                 (t.gyro_sigma > 0.0 ? gyro_noise(rng) : 0.0);
    out.imu.push_back(s);
    if (ts >= motion.t_end()) break;
  }
  const double dt_gnss = 1.0 / t.gnss_rate;
  for (double tt = motion.t_begin(); tt <= motion.t_end() + 1e-9;
       tt += dt_gnss) {
    const double ts = std::min(tt, motion.t_end());
    Pose p = motion.pose_at(ts);
    Eigen::Vector3d pos = p.position;
    if (t.gnss_sigma > 0.0)
      pos += Eigen::Vector3d(pos_noise(rng), pos_noise(rng), pos_noise(rng));
    GnssFix fix;
    fix.t = ts;
    fix.position = utm_to_wgs84(from_local(pos, frame));
    fix.quality = FixQuality::rtk_fixed;
    out.gnss.push_back(fix);
    if (ts >= motion.t_end()) break;
  }
  return out;
}

double raycast(const Heightfield& hf, const Eigen::Vector3d& origin,
               const Eigen::Vector3d& dir, double tmin, double tmax) {
  if (dir.z() >= 0.0 && origin.z() > hf.max_surface) return -1.0;
  double t0 = tmin;
  if (dir.z() < 0.0 && origin.z() > hf.max_surface) {
    // skip ahead to where the ray first enters the occupied height band
    const double enter = (origin.z() - hf.max_surface - 0.01) / -dir.z();
    t0 = std::max(t0, enter);
  }
  if (t0 >= tmax) return -1.0;

  auto above = [&](double t) {
    const Eigen::Vector3d p = origin + t * dir;
    return p.z() - hf.surface_at(p.x(), p.y());
  };
  double prev_t = t0;
  if (above(t0) <= 0.0) return -1.0;  // starts below the surface
  for (double t = t0 + hf.march_step; prev_t < tmax;
       t += hf.march_step) {
    t = std::min(t, tmax);
    if (above(t) <= 0.0) {
      double lo = prev_t, hi = t;
      for (int i = 0; i < hf.bisect_iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (above(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    if (t >= tmax) break;
    prev_t = t;
  }
  return -1.0;
}

namespace {

// One azimuth column (all channels) from a fixed sensor transform.
void cast_column(const RigidTransform& world_from_sensor, double az, double t,
                 const LidarSpec& spec, const Heightfield& hf,
                 std::mt19937_64& rng, Scan& out) {
  std::normal_distribution<double> noise(0.0, spec.range_sigma);
  for (int ch = 0; ch < 16; ++ch) {
    RawReturn r;
    r.t = t;
    r.channel = ch;
    r.azimuth = az;
    r.range = 1.0;
    const Eigen::Vector3d d =
        world_from_sensor.rotation * spherical_to_cartesian(r, spec);
    const double rho = raycast(hf, world_from_sensor.translation, d,
                               spec.min_range, spec.max_range);
    if (rho < 0.0) continue;
    const double noisy =
        rho + (spec.range_sigma > 0.0 ? noise(rng) : 0.0);
    if (noisy < spec.min_range || noisy > spec.max_range) continue;
    r.range = noisy;
    out.returns.push_back(r);
  }
}

}  // namespace

Scan simulate_scan(const Pose& p, const LidarSpec& spec, const Heightfield& hf,
                   const RigConfig& rig, std::mt19937_64& rng) {
  spec.validate();
  const RigidTransform T = base_to_sensor(p, rig);
  if (T.translation.z() <=
      hf.surface_at(T.translation.x(), T.translation.y()))
    throw DomainError("simulate_scan: sensor below the surface");
  Scan scan;
  scan.sweep_start = p.t;
  const int n_az = static_cast<int>(std::lround(2.0 * kPi / spec.azimuth_step));
  for (int j = 0; j < n_az; ++j) {
    const double az = j * spec.azimuth_step;
    const double t = p.t + (double(j) / n_az) * spec.sweep_period;
    cast_column(T, az, t, spec, hf, rng, scan);
  }
  return scan;
}

std::vector<ParcelTruth> ground_truth(const FieldSpec& f) {
  f.validate();
  if (f.canopy_heights.empty())
    throw DomainError("ground_truth: canopy heights not assigned");
  const LocalFrame frame{f.origin, "sim"};
  const int rows = f.crop_rows_per_parcel;
  double covered;
  if (f.stripe_width >= f.crop_row_spacing)
    covered = std::min(f.parcel_width,
                       (rows - 1) * f.crop_row_spacing + f.stripe_width);
  else
    covered = std::min(rows * f.stripe_width, f.parcel_width);

  std::vector<ParcelTruth> out;
  for (int r = 0; r < f.parcel_rows; ++r) {
    for (int c = 0; c < f.parcel_cols; ++c) {
      ParcelTruth t;
      t.id = f.parcel_id(r, c);
      const Eigen::Vector2d mn = f.parcel_min(r, c);
      const double h =
          f.canopy_heights[static_cast<std::size_t>(r) * f.parcel_cols + c];
      t.volume_m3 = h * covered * f.parcel_length;
      t.e_v_m3_per_ha =
          t.volume_m3 / (f.parcel_width * f.parcel_length) * 1e4;
      const double xs[4] = {mn.x(), mn.x() + f.parcel_width,
                            mn.x() + f.parcel_width, mn.x()};
      const double ys[4] = {mn.y(), mn.y(), mn.y() + f.parcel_length,
                            mn.y() + f.parcel_length};
      for (int i = 0; i < 4; ++i)
        t.corners[i] =
            utm_to_wgs84(from_local({xs[i], ys[i], 0.0}, frame));
      out.push_back(std::move(t));
    }
  }
  return out;
}

RigidTransform nadir_mount() {
  RigidTransform t;
  t.rotation =
      Eigen::AngleAxisd(kPi / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
  return t;
}

SimConfig::SimConfig() : lidar(LidarSpec::vlp16_like()) {
  rig.sensor_mount = nadir_mount();
}

SimBundle simulate(const SimConfig& cfg) {
  FieldSpec field = cfg.field;
  if (field.canopy_heights.empty()) assign_default_heights(field, cfg.seed);
  field.validate();
  cfg.lidar.validate();

  SimBundle b;
  b.frame = LocalFrame{field.origin, "sim"};
  const Heightfield hf = build_heightfield(field, cfg.hf_cell);
  const TruthMotion motion(cfg.traj, field);
  TruthStreams streams = simulate_trajectory(cfg.traj, field, cfg.seed);
  b.imu = std::move(streams.imu);
  b.gnss = std::move(streams.gnss);
  b.truth = std::move(streams.truth);

  const int n_az =
      static_cast<int>(std::lround(2.0 * kPi / cfg.lidar.azimuth_step));
  const double period = cfg.lidar.sweep_period;
  std::uint64_t sweep_index = 0;
  for (double t0 = motion.t_begin(); t0 + period <= motion.t_end() + 1e-9;
       t0 += period, ++sweep_index) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ (sweep_index * 0x100000001b3ull)));
    Scan scan;
    scan.sweep_start = t0;
    for (int j = 0; j < n_az; ++j) {
      const double t = t0 + (double(j) / n_az) * period;
      const Pose p = motion.pose_at(std::min(t, motion.t_end()));
      const RigidTransform T = base_to_sensor(p, cfg.rig);
      cast_column(T, j * cfg.lidar.azimuth_step, t, cfg.lidar, hf, rng, scan);
    }
    if (!scan.returns.empty()) b.scans.push_back(std::move(scan));
  }

  b.truth_parcels = ground_truth(field);
  for (const auto& t : b.truth_parcels)
    b.corners.push_back({t.id, t.corners});

  std::mt19937_64 cut_rng(splitmix64(cfg.seed ^ 0xc07a11ull));
  std::normal_distribution<double> noise(0.0, cfg.biomass_sigma);
  for (const auto& t : b.truth_parcels) {
    for (int i = 0; i < cfg.cuts_per_parcel; ++i) {
      CutSample s;
      s.id = t.id + "_cut" + std::to_string(i);
      s.e_v_m3_per_ha = t.e_v_m3_per_ha;
      s.biomass_kg_ha =
          std::max(0.0, kRefSlope * t.e_v_m3_per_ha + kRefIntercept +
                            (cfg.biomass_sigma > 0.0 ? noise(cut_rng) : 0.0));
      b.cuts.push_back(std::move(s));
    }
  }
  return b;
}

std::vector<Sample> make_regression_samples(std::size_t n, std::uint64_t seed,
                                            double sigma) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ev(3500.0, 6200.0);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ev(rng);
    out.push_back({x,
                   std::max(0.0, kRefSlope * x + kRefIntercept +
                                     (sigma > 0.0 ? noise(rng) : 0.0)),
                   "sim" + std::to_string(i)});
  }
  return out;
}

}  // namespace cropmap
