#include "cropmap/config.hpp"

#include <set>

#include <json.hpp>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"
#include "cropmap/io.hpp"

namespace cropmap {

using nlohmann::json;

RunConfig::RunConfig() : lidar(LidarSpec::vlp16_like()) { finalize(); }

void RunConfig::finalize() {
  const double r = deg2rad(mount_rpy_deg[0]);
  const double p = deg2rad(mount_rpy_deg[1]);
  const double y = deg2rad(mount_rpy_deg[2]);
  rig.sensor_mount.rotation =
      (Eigen::AngleAxisd(y, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(p, Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(r, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  rig.sensor_mount.translation = {mount_xyz_m[0], mount_xyz_m[1],
                                  mount_xyz_m[2]};
  sim.rig = rig;
  sim.lidar = lidar;
  sim.biomass_sigma = biomass.noise_sigma;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SchemaError("config " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
void get(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where, std::string("bad value for '") + key + "'");
  }
}

void parse_rig(const json& j, RunConfig& c) {
  check_keys(j, "rig",
             {"arm_length_m", "antenna_height_m", "mount_rpy_deg",
              "mount_xyz_m"});
  get(j, "rig", "arm_length_m", c.rig.arm_length);
  get(j, "rig", "antenna_height_m", c.rig.antenna_height);
  get(j, "rig", "mount_rpy_deg", c.mount_rpy_deg);
  get(j, "rig", "mount_xyz_m", c.mount_xyz_m);
}

void parse_lidar(const json& j, RunConfig& c) {
  check_keys(j, "lidar",
             {"channel_elevations_deg", "azimuth_step_deg", "range_sigma_m",
              "min_range_m", "max_range_m", "sweep_period_s"});
  if (j.contains("channel_elevations_deg")) {
    std::array<double, 16> deg{};
    get(j, "lidar", "channel_elevations_deg", deg);
    for (int i = 0; i < 16; ++i) c.lidar.channel_elevations[i] = deg2rad(deg[i]);
  }
  if (j.contains("azimuth_step_deg")) {
    double deg = 0.0;
    get(j, "lidar", "azimuth_step_deg", deg);
    c.lidar.azimuth_step = deg2rad(deg);
  }
  get(j, "lidar", "range_sigma_m", c.lidar.range_sigma);
  get(j, "lidar", "min_range_m", c.lidar.min_range);
  get(j, "lidar", "max_range_m", c.lidar.max_range);
  get(j, "lidar", "sweep_period_s", c.lidar.sweep_period);
}

void parse_fusion(const json& j, RunConfig& c) {
  check_keys(j, "fusion",
             {"rate_var", "bias_walk_var", "speed_floor_m_s",
              "course_baseline_m", "gnss_sigma_m", "max_gap_s", "init_yaw_var",
              "init_bias_var", "use_float_fixes", "utm_zone"});
  get(j, "fusion", "rate_var", c.fusion.noise.rate_var);
  get(j, "fusion", "bias_walk_var", c.fusion.noise.bias_walk_var);
  get(j, "fusion", "speed_floor_m_s", c.fusion.speed_floor);
  get(j, "fusion", "course_baseline_m", c.fusion.course_baseline);
  get(j, "fusion", "gnss_sigma_m", c.fusion.gnss_sigma);
  get(j, "fusion", "max_gap_s", c.fusion.max_gap);
  get(j, "fusion", "init_yaw_var", c.fusion.init_yaw_var);
  get(j, "fusion", "init_bias_var", c.fusion.init_bias_var);
  get(j, "fusion", "use_float_fixes", c.fusion.use_float_fixes);
  get(j, "fusion", "utm_zone", c.fusion.utm_zone);
}

void parse_cloud(const json& j, RunConfig& c) {
  check_keys(j, "cloud", {"voxel_leaf_m", "ground", "segment_h_thresh_m"});
  get(j, "cloud", "voxel_leaf_m", c.cloud.voxel_leaf);
  get(j, "cloud", "segment_h_thresh_m", c.cloud.segment_h_thresh);
  if (j.contains("ground")) {
    const json& g = j.at("ground");
    check_keys(g, "cloud.ground",
               {"cell_m", "percentile", "min_count", "fill_radius_m",
                "reject_thresh_m", "reject_radius_m"});
    get(g, "cloud.ground", "cell_m", c.cloud.ground.cell);
    get(g, "cloud.ground", "percentile", c.cloud.ground.percentile);
    get(g, "cloud.ground", "min_count", c.cloud.ground.min_count);
    get(g, "cloud.ground", "fill_radius_m", c.cloud.ground.fill_radius);
    get(g, "cloud.ground", "reject_thresh_m", c.cloud.ground.reject_thresh);
    get(g, "cloud.ground", "reject_radius_m", c.cloud.ground.reject_radius);
  }
}

void parse_parcels(const json& j, RunConfig& c) {
  check_keys(j, "parcels",
             {"leaf_m", "method", "invalid_ground_max", "min_plant_points"});
  get(j, "parcels", "leaf_m", c.parcels.leaf);
  if (j.contains("method")) {
    std::string m;
    get(j, "parcels", "method", m);
    if (m == "voxel")
      c.parcels.method = VolumeMethod::voxel_occupancy;
    else if (m == "column")
      c.parcels.method = VolumeMethod::column_height;
    else
      fail("parcels", "method must be 'voxel' or 'column'");
  }
  get(j, "parcels", "invalid_ground_max", c.parcels.invalid_ground_max);
  std::uint64_t mp = c.parcels.min_plant_points;
  get(j, "parcels", "min_plant_points", mp);
  c.parcels.min_plant_points = mp;
}

void parse_biomass(const json& j, RunConfig& c) {
  check_keys(j, "biomass", {"order", "noise_sigma_kg_ha"});
  get(j, "biomass", "order", c.biomass.order);
  get(j, "biomass", "noise_sigma_kg_ha", c.biomass.noise_sigma);
  if (c.biomass.order != 1 && c.biomass.order != 2)
    fail("biomass", "order must be 1 or 2");
}

void parse_sim(const json& j, RunConfig& c) {
  check_keys(j, "sim",
             {"field", "trajectory", "hf_cell_m", "seed", "cuts_per_parcel"});
  get(j, "sim", "hf_cell_m", c.sim.hf_cell);
  get(j, "sim", "seed", c.sim.seed);
  get(j, "sim", "cuts_per_parcel", c.sim.cuts_per_parcel);
  if (j.contains("field")) {
    const json& f = j.at("field");
    check_keys(f, "sim.field",
               {"parcel_rows", "parcel_cols", "parcel_width_m",
                "parcel_length_m", "gap_m", "crop_row_spacing_m",
                "crop_rows_per_parcel", "stripe_width_m", "canopy_heights_m",
                "soil_poly", "origin", "margin_m"});
    FieldSpec& fs = c.sim.field;
    get(f, "sim.field", "parcel_rows", fs.parcel_rows);
    get(f, "sim.field", "parcel_cols", fs.parcel_cols);
    get(f, "sim.field", "parcel_width_m", fs.parcel_width);
    get(f, "sim.field", "parcel_length_m", fs.parcel_length);
    get(f, "sim.field", "gap_m", fs.gap);
    get(f, "sim.field", "crop_row_spacing_m", fs.crop_row_spacing);
    get(f, "sim.field", "crop_rows_per_parcel", fs.crop_rows_per_parcel);
    get(f, "sim.field", "stripe_width_m", fs.stripe_width);
    get(f, "sim.field", "canopy_heights_m", fs.canopy_heights);
    get(f, "sim.field", "soil_poly", fs.soil_poly);
    get(f, "sim.field", "margin_m", fs.margin);
    if (f.contains("origin")) {
      const json& o = f.at("origin");
      check_keys(o, "sim.field.origin",
                 {"zone", "north", "easting_m", "northing_m", "alt_m"});
      get(o, "sim.field.origin", "zone", fs.origin.zone);
      get(o, "sim.field.origin", "north", fs.origin.north);
      get(o, "sim.field.origin", "easting_m", fs.origin.easting);
      get(o, "sim.field.origin", "northing_m", fs.origin.northing);
      get(o, "sim.field.origin", "alt_m", fs.origin.alt_m);
    }
  }
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    check_keys(t, "sim.trajectory",
               {"pass_offsets_x_m", "speed_m_s", "sensor_height_m",
                "imu_rate_hz", "gnss_rate_hz", "y_margin_m", "t0_s",
                "gyro_bias_rad_s", "gyro_sigma_rad_s", "att_sigma_rad",
                "gnss_sigma_m"});
    TrajectorySpec& ts = c.sim.traj;
    get(t, "sim.trajectory", "pass_offsets_x_m", ts.pass_offsets_x);
    get(t, "sim.trajectory", "speed_m_s", ts.speed);
    get(t, "sim.trajectory", "sensor_height_m", ts.sensor_height);
    get(t, "sim.trajectory", "imu_rate_hz", ts.imu_rate);
    get(t, "sim.trajectory", "gnss_rate_hz", ts.gnss_rate);
    get(t, "sim.trajectory", "y_margin_m", ts.y_margin);
    get(t, "sim.trajectory", "t0_s", ts.t0);
    get(t, "sim.trajectory", "gyro_bias_rad_s", ts.gyro_bias);
    get(t, "sim.trajectory", "gyro_sigma_rad_s", ts.gyro_sigma);
    get(t, "sim.trajectory", "att_sigma_rad", ts.att_sigma);
    get(t, "sim.trajectory", "gnss_sigma_m", ts.gnss_sigma);
  }
}

}  // namespace

RunConfig load_config(const std::filesystem::path& p) {
  json doc;
  try {
    doc = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw SchemaError(p.filename().string() + ": " + e.what());
  }
  check_keys(doc, "(root)",
             {"rig", "lidar", "fusion", "cloud", "parcels", "biomass", "sim"});
  RunConfig c;
  if (doc.contains("rig")) parse_rig(doc.at("rig"), c);
  if (doc.contains("lidar")) parse_lidar(doc.at("lidar"), c);
  if (doc.contains("fusion")) parse_fusion(doc.at("fusion"), c);
  if (doc.contains("cloud")) parse_cloud(doc.at("cloud"), c);
  if (doc.contains("parcels")) parse_parcels(doc.at("parcels"), c);
  if (doc.contains("biomass")) parse_biomass(doc.at("biomass"), c);
  if (doc.contains("sim")) parse_sim(doc.at("sim"), c);
  c.finalize();
  c.lidar.validate();
  return c;
}

void write_config(const std::filesystem::path& p, const RunConfig& c) {
  json doc;
  doc["rig"] = {{"arm_length_m", c.rig.arm_length},
                {"antenna_height_m", c.rig.antenna_height},
                {"mount_rpy_deg", c.mount_rpy_deg},
                {"mount_xyz_m", c.mount_xyz_m}};
  std::array<double, 16> elev_deg{};
  for (int i = 0; i < 16; ++i)
    elev_deg[i] = rad2deg(c.lidar.channel_elevations[i]);
  doc["lidar"] = {{"channel_elevations_deg", elev_deg},
                  {"azimuth_step_deg", rad2deg(c.lidar.azimuth_step)},
                  {"range_sigma_m", c.lidar.range_sigma},
                  {"min_range_m", c.lidar.min_range},
                  {"max_range_m", c.lidar.max_range},
                  {"sweep_period_s", c.lidar.sweep_period}};
  doc["fusion"] = {{"rate_var", c.fusion.noise.rate_var},
                   {"bias_walk_var", c.fusion.noise.bias_walk_var},
                   {"speed_floor_m_s", c.fusion.speed_floor},
                   {"course_baseline_m", c.fusion.course_baseline},
                   {"gnss_sigma_m", c.fusion.gnss_sigma},
                   {"max_gap_s", c.fusion.max_gap},
                   {"init_yaw_var", c.fusion.init_yaw_var},
                   {"init_bias_var", c.fusion.init_bias_var},
                   {"use_float_fixes", c.fusion.use_float_fixes},
                   {"utm_zone", c.fusion.utm_zone}};
  doc["cloud"] = {{"voxel_leaf_m", c.cloud.voxel_leaf},
                  {"segment_h_thresh_m", c.cloud.segment_h_thresh},
                  {"ground",
                   {{"cell_m", c.cloud.ground.cell},
                    {"percentile", c.cloud.ground.percentile},
                    {"min_count", c.cloud.ground.min_count},
                    {"fill_radius_m", c.cloud.ground.fill_radius},
                    {"reject_thresh_m", c.cloud.ground.reject_thresh},
                    {"reject_radius_m", c.cloud.ground.reject_radius}}}};
  doc["parcels"] = {
      {"leaf_m", c.parcels.leaf},
      {"method",
       c.parcels.method == VolumeMethod::voxel_occupancy ? "voxel" : "column"},
      {"invalid_ground_max", c.parcels.invalid_ground_max},
      {"min_plant_points", c.parcels.min_plant_points}};
  doc["biomass"] = {{"order", c.biomass.order},
                    {"noise_sigma_kg_ha", c.biomass.noise_sigma}};
  const FieldSpec& f = c.sim.field;
  const TrajectorySpec& t = c.sim.traj;
  doc["sim"] = {
      {"hf_cell_m", c.sim.hf_cell},
      {"seed", c.sim.seed},
      {"cuts_per_parcel", c.sim.cuts_per_parcel},
      {"field",
       {{"parcel_rows", f.parcel_rows},
        {"parcel_cols", f.parcel_cols},
        {"parcel_width_m", f.parcel_width},
        {"parcel_length_m", f.parcel_length},
        {"gap_m", f.gap},
        {"crop_row_spacing_m", f.crop_row_spacing},
        {"crop_rows_per_parcel", f.crop_rows_per_parcel},
        {"stripe_width_m", f.stripe_width},
        {"canopy_heights_m", f.canopy_heights},
        {"soil_poly", f.soil_poly},
        {"margin_m", f.margin},
        {"origin",
         {{"zone", f.origin.zone},
          {"north", f.origin.north},
          {"easting_m", f.origin.easting},
          {"northing_m", f.origin.northing},
          {"alt_m", f.origin.alt_m}}}}},
      {"trajectory",
       {{"pass_offsets_x_m", t.pass_offsets_x},
        {"speed_m_s", t.speed},
        {"sensor_height_m", t.sensor_height},
        {"imu_rate_hz", t.imu_rate},
        {"gnss_rate_hz", t.gnss_rate},
        {"y_margin_m", t.y_margin},
        {"t0_s", t.t0},
        {"gyro_bias_rad_s", t.gyro_bias},
        {"gyro_sigma_rad_s", t.gyro_sigma},
        {"att_sigma_rad", t.att_sigma},
        {"gnss_sigma_m", t.gnss_sigma}}}};
  atomic_write(p, doc.dump(2) + "\n");
}

}  // namespace cropmap
