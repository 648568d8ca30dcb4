#include "cropmap/io.hpp"

#include <charconv>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cropmap/errors.hpp"

namespace cropmap {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void atomic_write(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

std::string created_stamp() {
  if (const char* env = std::getenv("CROPMAP_CREATED")) return env;
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(',', start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

[[noreturn]] void schema_fail(const fs::path& p, std::size_t row,
                              std::size_t col, const std::string& what) {
  throw SchemaError(p.filename().string() + " row " + std::to_string(row) +
                    " col " + std::to_string(col) + ": " + what);
}

double parse_double(const fs::path& p, std::size_t row, std::size_t col,
                    const std::string& field) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    schema_fail(p, row, col, "expected a number, got '" + field + "'");
  return v;
}

// Parsed CSV body with schema checks applied; rows are 1-based in messages.
std::vector<std::vector<std::string>> read_csv(const fs::path& p,
                                               const std::string& header,
                                               std::size_t n_fields) {
  const auto lines = split_lines(read_file(p));
  if (lines.empty() || lines[0] != header)
    throw SchemaError(p.filename().string() + ": expected header '" + header +
                      "'");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.size() != n_fields)
      schema_fail(p, i + 1, fields.size(),
                  "expected " + std::to_string(n_fields) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

const char* quality_name(FixQuality q) {
  switch (q) {
    case FixQuality::rtk_fixed: return "fixed";
    case FixQuality::rtk_float: return "float";
    case FixQuality::standalone: return "standalone";
  }
  return "fixed";
}

FixQuality quality_from(const fs::path& p, std::size_t row,
                        const std::string& s) {
  if (s == "fixed") return FixQuality::rtk_fixed;
  if (s == "float") return FixQuality::rtk_float;
  if (s == "standalone") return FixQuality::standalone;
  schema_fail(p, row, 5, "unknown fix quality '" + s + "'");
}

template <typename T>
void append_le(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take_le(const std::string& buf, std::size_t& off, const fs::path& p) {
  if (off + sizeof(T) > buf.size())
    throw SchemaError(p.filename().string() + ": truncated record");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void write_imu_csv(const fs::path& p, const std::vector<ImuSample>& samples) {
  std::string out = "t,roll_rad,pitch_rad,yaw_rate_rad_s\n";
  for (const auto& s : samples) {
    out += format_double(s.t) + "," + format_double(s.roll) + "," +
           format_double(s.pitch) + "," + format_double(s.yaw_rate) + "\n";
  }
  atomic_write(p, out);
}

std::vector<ImuSample> read_imu_csv(const fs::path& p) {
  std::vector<ImuSample> out;
  std::size_t row = 1;
  for (const auto& f : read_csv(p, "t,roll_rad,pitch_rad,yaw_rate_rad_s", 4)) {
    ++row;
    ImuSample s;
    s.t = parse_double(p, row, 1, f[0]);
    s.roll = parse_double(p, row, 2, f[1]);
    s.pitch = parse_double(p, row, 3, f[2]);
    s.yaw_rate = parse_double(p, row, 4, f[3]);
    out.push_back(s);
  }
  return out;
}

void write_gnss_csv(const fs::path& p, const std::vector<GnssFix>& fixes) {
  std::string out = "t,lat_deg,lon_deg,alt_m,quality\n";
  for (const auto& f : fixes) {
    out += format_double(f.t) + "," + format_double(f.position.lat_deg) + "," +
           format_double(f.position.lon_deg) + "," +
           format_double(f.position.alt_m) + "," + quality_name(f.quality) +
           "\n";
  }
  atomic_write(p, out);
}

std::vector<GnssFix> read_gnss_csv(const fs::path& p) {
  std::vector<GnssFix> out;
  std::size_t row = 1;
  for (const auto& f : read_csv(p, "t,lat_deg,lon_deg,alt_m,quality", 5)) {
    ++row;
    GnssFix fix;
    fix.t = parse_double(p, row, 1, f[0]);
    fix.position.lat_deg = parse_double(p, row, 2, f[1]);
    fix.position.lon_deg = parse_double(p, row, 3, f[2]);
    fix.position.alt_m = parse_double(p, row, 4, f[3]);
    fix.quality = quality_from(p, row, f[4]);
    out.push_back(fix);
  }
  return out;
}

void write_corners_csv(const fs::path& p,
                       const std::vector<BoundaryRecord>& records) {
  std::string out = "id,lat1,lon1,lat2,lon2,lat3,lon3,lat4,lon4\n";
  for (const auto& r : records) {
    out += r.id;
    for (const auto& c : r.corners)
      out += "," + format_double(c.lat_deg) + "," + format_double(c.lon_deg);
    out += "\n";
  }
  atomic_write(p, out);
}

std::vector<BoundaryRecord> read_corners_csv(const fs::path& p) {
  std::vector<BoundaryRecord> out;
  std::size_t row = 1;
  for (const auto& f :
       read_csv(p, "id,lat1,lon1,lat2,lon2,lat3,lon3,lat4,lon4", 9)) {
    ++row;
    BoundaryRecord r;
    r.id = f[0];
    if (r.id.empty()) schema_fail(p, row, 1, "empty id");
    for (int i = 0; i < 4; ++i) {
      r.corners[i].lat_deg = parse_double(p, row, 2 + 2 * i, f[1 + 2 * i]);
      r.corners[i].lon_deg = parse_double(p, row, 3 + 2 * i, f[2 + 2 * i]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_samples_csv(const fs::path& p, const std::vector<SampleRow>& rows) {
  std::string out = "id,e_v_m3_ha,biomass_kg_ha\n";
  for (const auto& r : rows) {
    out += r.id + ",";
    if (r.e_v_m3_ha) out += format_double(*r.e_v_m3_ha);
    out += "," + format_double(r.biomass_kg_ha) + "\n";
  }
  atomic_write(p, out);
}

std::vector<SampleRow> read_samples_csv(const fs::path& p) {
  std::vector<SampleRow> out;
  std::size_t row = 1;
  for (const auto& f : read_csv(p, "id,e_v_m3_ha,biomass_kg_ha", 3)) {
    ++row;
    SampleRow r;
    r.id = f[0];
    if (r.id.empty()) schema_fail(p, row, 1, "empty id");
    if (!f[1].empty()) r.e_v_m3_ha = parse_double(p, row, 2, f[1]);
    r.biomass_kg_ha = parse_double(p, row, 3, f[2]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_truth_csv(const fs::path& p, const std::vector<TruthRow>& rows) {
  std::string out = "id,volume_m3,e_v_m3_ha\n";
  for (const auto& r : rows)
    out += r.id + "," + format_double(r.volume_m3) + "," +
           format_double(r.e_v_m3_ha) + "\n";
  atomic_write(p, out);
}

std::vector<TruthRow> read_truth_csv(const fs::path& p) {
  std::vector<TruthRow> out;
  std::size_t row = 1;
  for (const auto& f : read_csv(p, "id,volume_m3,e_v_m3_ha", 3)) {
    ++row;
    out.push_back({f[0], parse_double(p, row, 2, f[1]),
                   parse_double(p, row, 3, f[2])});
  }
  return out;
}

void write_metrics_csv(const fs::path& p,
                       const std::vector<ParcelMetrics>& rows) {
  std::string out =
      "id,n_points,n_plant,footprint_m2,volume_m3,e_v_m3_per_ha,method,"
      "low_confidence\n";
  for (const auto& m : rows) {
    out += m.id + "," + std::to_string(m.n_points) + "," +
           std::to_string(m.n_plant_points) + "," +
           format_double(m.footprint_m2) + "," + format_double(m.volume_m3) +
           "," + format_double(m.e_v_m3_per_ha) + "," +
           (m.method == VolumeMethod::voxel_occupancy ? "voxel" : "column") +
           "," + (m.low_confidence ? "1" : "0") + "\n";
  }
  atomic_write(p, out);
}

std::vector<ParcelMetrics> read_metrics_csv(const fs::path& p) {
  std::vector<ParcelMetrics> out;
  std::size_t row = 1;
  for (const auto& f : read_csv(p,
                                "id,n_points,n_plant,footprint_m2,volume_m3,"
                                "e_v_m3_per_ha,method,low_confidence",
                                8)) {
    ++row;
    ParcelMetrics m;
    m.id = f[0];
    m.n_points = static_cast<std::size_t>(parse_double(p, row, 2, f[1]));
    m.n_plant_points = static_cast<std::size_t>(parse_double(p, row, 3, f[2]));
    m.footprint_m2 = parse_double(p, row, 4, f[3]);
    m.volume_m3 = parse_double(p, row, 5, f[4]);
    m.e_v_m3_per_ha = parse_double(p, row, 6, f[5]);
    if (f[6] == "voxel")
      m.method = VolumeMethod::voxel_occupancy;
    else if (f[6] == "column")
      m.method = VolumeMethod::column_height;
    else
      schema_fail(p, row, 7, "unknown method '" + f[6] + "'");
    if (f[7] == "0")
      m.low_confidence = false;
    else if (f[7] == "1")
      m.low_confidence = true;
    else
      schema_fail(p, row, 8, "low_confidence must be 0 or 1");
    out.push_back(std::move(m));
  }
  return out;
}

void write_scans(const fs::path& p, const std::vector<Scan>& scans) {
  std::string buf = "CMSCAN01";
  for (const auto& s : scans) {
    append_le(buf, s.sweep_start);
    append_le(buf, static_cast<std::uint32_t>(s.returns.size()));
    for (const auto& r : s.returns) {
      append_le(buf, r.t);
      append_le(buf, static_cast<std::uint8_t>(r.channel));
      append_le(buf, static_cast<float>(r.azimuth));
      append_le(buf, static_cast<float>(r.range));
    }
  }
  atomic_write(p, buf);
}

std::vector<Scan> read_scans(const fs::path& p) {
  const std::string buf = read_file(p);
  if (buf.size() < 8 || buf.compare(0, 8, "CMSCAN01") != 0)
    throw SchemaError(p.filename().string() + ": bad magic, not a scan file");
  std::vector<Scan> out;
  std::size_t off = 8;
  while (off < buf.size()) {
    Scan s;
    s.sweep_start = take_le<double>(buf, off, p);
    const std::uint32_t n = take_le<std::uint32_t>(buf, off, p);
    s.returns.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      RawReturn r;
      r.t = take_le<double>(buf, off, p);
      r.channel = take_le<std::uint8_t>(buf, off, p);
      r.azimuth = take_le<float>(buf, off, p);
      r.range = take_le<float>(buf, off, p);
      s.returns.push_back(r);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_ply(const fs::path& p, const PointCloud& cloud) {
  const auto& o = cloud.frame.origin;
  std::string buf;
  buf += "ply\nformat binary_little_endian 1.0\n";
  buf += "comment origin_utm_zone " + std::to_string(o.zone) +
         (o.north ? "N" : "S") + "\n";
  buf += "comment origin_easting " + format_double(o.easting) + "\n";
  buf += "comment origin_northing " + format_double(o.northing) + "\n";
  buf += "comment origin_alt " + format_double(o.alt_m) + "\n";
  buf += "element vertex " + std::to_string(cloud.size()) + "\n";
  buf += "property float x\nproperty float y\nproperty float z\n";
  buf += "property uchar label\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    append_le(buf, cloud.points[i].x());
    append_le(buf, cloud.points[i].y());
    append_le(buf, cloud.points[i].z());
    append_le(buf, static_cast<std::uint8_t>(cloud.labels[i]));
  }
  atomic_write(p, buf);
}

PointCloud read_ply(const fs::path& p) {
  const std::string buf = read_file(p);
  const std::size_t header_end = buf.find("end_header\n");
  if (buf.compare(0, 4, "ply\n") != 0 || header_end == std::string::npos)
    throw SchemaError(p.filename().string() + ": not a PLY file");
  const std::string header = buf.substr(0, header_end);
  if (header.find("format binary_little_endian 1.0") == std::string::npos)
    throw SchemaError(p.filename().string() + ": unsupported PLY format");

  PointCloud cloud;
  std::size_t n_vertex = 0;
  bool have_vertex = false;
  for (const auto& line : split_lines(header)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment") {
      std::string key, value;
      ss >> key >> value;
      auto& o = cloud.frame.origin;
      if (key == "origin_utm_zone") {
        if (value.empty()) throw SchemaError("bad origin_utm_zone comment");
        o.north = value.back() != 'S';
        o.zone = std::stoi(value.substr(0, value.size() - 1));
      } else if (key == "origin_easting") {
        o.easting = parse_double(p, 0, 0, value);
      } else if (key == "origin_northing") {
        o.northing = parse_double(p, 0, 0, value);
      } else if (key == "origin_alt") {
        o.alt_m = parse_double(p, 0, 0, value);
      }
    } else if (word == "element") {
      std::string name;
      ss >> name >> n_vertex;
      if (name != "vertex")
        throw SchemaError(p.filename().string() + ": unexpected element");
      have_vertex = true;
    }
  }
  if (!have_vertex)
    throw SchemaError(p.filename().string() + ": missing vertex element");

  std::size_t off = header_end + 11;
  cloud.points.reserve(n_vertex);
  cloud.labels.reserve(n_vertex);
  for (std::size_t i = 0; i < n_vertex; ++i) {
    const float x = take_le<float>(buf, off, p);
    const float y = take_le<float>(buf, off, p);
    const float z = take_le<float>(buf, off, p);
    const std::uint8_t label = take_le<std::uint8_t>(buf, off, p);
    if (label > 2)
      throw SchemaError(p.filename().string() + ": label out of range");
    cloud.push({x, y, z}, static_cast<PointLabel>(label));
  }
  return cloud;
}

void write_model_json(const fs::path& p, const FitReport& fit) {
  json doc;
  doc["order"] = fit.model.order;
  doc["coefficients"] = fit.model.coefficients;
  doc["r_squared"] = fit.r_squared;
  doc["n"] = fit.n;
  doc["created"] = created_stamp();
  atomic_write(p, doc.dump(2) + "\n");
}

ModelFile read_model_json(const fs::path& p) {
  json doc;
  try {
    doc = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw SchemaError(p.filename().string() + ": " + e.what());
  }
  ModelFile out;
  try {
    out.model.order = doc.at("order").get<int>();
    out.model.coefficients = doc.at("coefficients").get<std::vector<double>>();
    out.r_squared = doc.at("r_squared").get<double>();
    out.n = doc.at("n").get<std::size_t>();
    out.created = doc.value("created", "");
  } catch (const json::exception& e) {
    throw SchemaError(p.filename().string() + ": " + e.what());
  }
  if (out.model.order < 1 || out.model.order > 2 ||
      out.model.coefficients.size() !=
          static_cast<std::size_t>(out.model.order) + 1)
    throw SchemaError(p.filename().string() + ": inconsistent model order");
  return out;
}

void write_scatter_svg(const fs::path& p, const std::vector<Sample>& samples,
                       const std::vector<PolyModel>& models) {
  const double w = 720, h = 520;
  const double ml = 80, mr = 30, mt = 30, mb = 60;
  double x0 = 3000, x1 = 7000, y0 = 0, y1 = 60000;
  if (!samples.empty()) {
    x0 = x1 = samples[0].e_v;
    y0 = y1 = samples[0].b;
    for (const auto& s : samples) {
      x0 = std::min(x0, s.e_v);
      x1 = std::max(x1, s.e_v);
      y0 = std::min(y0, s.b);
      y1 = std::max(y1, s.b);
    }
    const double px = std::max(1.0, 0.05 * (x1 - x0));
    const double py = std::max(1.0, 0.05 * (y1 - y0));
    x0 -= px; x1 += px; y0 -= py; y1 += py;
  }
  auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto sy = [&](double y) {
    return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         format_double(w) + "\" height=\"" + format_double(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(h - mb) +
         "\" x2=\"" + format_double(w - mr) + "\" y2=\"" +
         format_double(h - mb) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(mt) +
         "\" x2=\"" + format_double(ml) + "\" y2=\"" + format_double(h - mb) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + format_double((ml + w - mr) / 2) + "\" y=\"" +
         format_double(h - 15) +
         "\" text-anchor=\"middle\">estimated volume density e_v "
         "(m3/ha)</text>\n";
  svg += "<text x=\"20\" y=\"" + format_double((mt + h - mb) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
         format_double((mt + h - mb) / 2) +
         ")\">fresh biomass (kg/ha)</text>\n";
  // axis extremes
  svg += "<text x=\"" + format_double(ml) + "\" y=\"" + format_double(h - 40) +
         "\" text-anchor=\"middle\">" + format_double(x0) + "</text>\n";
  svg += "<text x=\"" + format_double(w - mr) + "\" y=\"" +
         format_double(h - 40) + "\" text-anchor=\"middle\">" +
         format_double(x1) + "</text>\n";
  svg += "<text x=\"" + format_double(ml - 10) + "\" y=\"" +
         format_double(h - mb) + "\" text-anchor=\"end\">" + format_double(y0) +
         "</text>\n";
  svg += "<text x=\"" + format_double(ml - 10) + "\" y=\"" +
         format_double(mt + 5) + "\" text-anchor=\"end\">" + format_double(y1) +
         "</text>\n";

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    std::string pts;
    for (int i = 0; i <= 100; ++i) {
      const double x = x0 + (x1 - x0) * i / 100.0;
      const double y = predict(models[mi], x);
      pts += format_double(sx(x)) + "," + format_double(sy(y)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += colors[mi % 3];
    svg += "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
  }
  for (const auto& s : samples) {
    svg += "<circle class=\"sample\" cx=\"" + format_double(sx(s.e_v)) +
           "\" cy=\"" + format_double(sy(s.b)) +
           "\" r=\"3\" fill=\"none\" stroke=\"black\"><title>" + s.source_id +
           "</title></circle>\n";
  }
  svg += "</svg>\n";
  atomic_write(p, svg);
}

}  // namespace cropmap
