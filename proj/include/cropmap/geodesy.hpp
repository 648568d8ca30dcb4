#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

namespace cropmap {

// WGS84 geographic coordinate, altitude in meters above the ellipsoid.
struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;
};

// UTM grid coordinate. The hemisphere flag is authoritative; the band letter
// is derived for display only.
struct UtmCoord {
  int zone = 32;
  bool north = true;
  double easting = 0.0;
  double northing = 0.0;
  double alt_m = 0.0;

  // e.g. "32U" for the Danish field site.
  std::string grid_designator(double lat_deg) const;
};

// Cartesian working frame anchored at a UTM origin. All local coordinates are
// plain offsets from the origin, so clouds can be stored at single precision.
struct LocalFrame {
  UtmCoord origin;
  std::string description;
};

// Throws DomainError on out-of-range latitude/longitude. Longitude is
// normalized to (-180, 180] before projecting.
GeoPoint validate_geo(const GeoPoint& p);

int natural_utm_zone(double lon_deg);
char utm_band_letter(double lat_deg);

// Transverse Mercator on the WGS84 ellipsoid (Krueger series, 6th order in
// the third flattening), scale 0.9996, false easting 500 km. A forced zone
// must lie within one zone of the natural one.
UtmCoord wgs84_to_utm(const GeoPoint& p, std::optional<int> forced_zone = {});
GeoPoint utm_to_wgs84(const UtmCoord& c);

Eigen::Vector3d to_local(const UtmCoord& c, const LocalFrame& f);
UtmCoord from_local(const Eigen::Vector3d& v, const LocalFrame& f);

}  // namespace cropmap
