#include "cropmap/geodesy.hpp"

#include <array>
#include <cmath>
#include <complex>

#include "cropmap/angles.hpp"
#include "cropmap/errors.hpp"

namespace cropmap {
namespace {

constexpr double kA = 6378137.0;              // WGS84 semi-major axis
constexpr double kF = 1.0 / 298.257223563;    // flattening
constexpr double kK0 = 0.9996;                // UTM scale on the central meridian
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthing = 10000000.0;  // southern hemisphere only

constexpr double kN = kF / (2.0 - kF);  // third flattening
const double kE2 = kF * (2.0 - kF);
const double kE = std::sqrt(kE2);

// Rectifying radius A = a/(1+n) (1 + n^2/4 + n^4/64 + n^6/256).
const double kRectRadius = kA / (1.0 + kN) *
    (1.0 + kN * kN / 4.0 + std::pow(kN, 4) / 64.0 + std::pow(kN, 6) / 256.0);

struct Series {
  std::array<double, 6> alpha;
  std::array<double, 6> beta;
};

Series make_series() {
  const double n1 = kN, n2 = n1 * n1, n3 = n2 * n1, n4 = n3 * n1, n5 = n4 * n1,
               n6 = n5 * n1;
  Series s;
  s.alpha = {
      n1 / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 +
          7891 * n6 / 37800,
      13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 -
          1983433 * n6 / 1935360,
      61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 +
          167603 * n6 / 181440,
      49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
      34729 * n5 / 80640 - 3418889 * n6 / 1995840,
      212378941 * n6 / 319334400,
  };
  s.beta = {
      n1 / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 +
          96199 * n6 / 604800,
      n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 -
          1118711 * n6 / 3870720,
      17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
      4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
      4583 * n5 / 161280 - 108847 * n6 / 3991680,
      20648693 * n6 / 638668800,
  };
  return s;
}

const Series& series() {
  static const Series s = make_series();
  return s;
}

double central_meridian_deg(int zone) { return zone * 6.0 - 183.0; }

// tau' = tan(chi) from tau = tan(phi) (conformal latitude).
double taupf(double tau) {
  const double tau1 = std::hypot(1.0, tau);
  const double sig = std::sinh(kE * std::atanh(kE * tau / tau1));
  return std::hypot(1.0, sig) * tau - sig * tau1;
}

// Invert taupf by Newton iteration.
double tauf(double taup) {
  const double e2m = 1.0 - kE2;
  double tau = taup / e2m;
  const double stol = 1e-14 * std::max(1.0, std::abs(taup));
  for (int i = 0; i < 8; ++i) {
    const double taupa = taupf(tau);
    const double dtau = (taup - taupa) * (1.0 + e2m * tau * tau) /
                        (e2m * std::hypot(1.0, tau) * std::hypot(1.0, taupa));
    tau += dtau;
    if (std::abs(dtau) < stol) break;
  }
  return tau;
}

}  // namespace

GeoPoint validate_geo(const GeoPoint& p) {
  if (!std::isfinite(p.lat_deg) || !std::isfinite(p.lon_deg) ||
      p.lat_deg < -90.0 || p.lat_deg > 90.0) {
    throw DomainError("latitude out of range: " + std::to_string(p.lat_deg));
  }
  if (!std::isfinite(p.lon_deg) || p.lon_deg < -540.0 || p.lon_deg > 540.0) {
    throw DomainError("longitude out of range: " + std::to_string(p.lon_deg));
  }
  GeoPoint q = p;
  // normalize longitude to (-180, 180]
  q.lon_deg = std::fmod(q.lon_deg, 360.0);
  if (q.lon_deg <= -180.0) q.lon_deg += 360.0;
  if (q.lon_deg > 180.0) q.lon_deg -= 360.0;
  return q;
}

int natural_utm_zone(double lon_deg) {
  int zone = static_cast<int>(std::floor((lon_deg + 180.0) / 6.0)) % 60 + 1;
  if (zone < 1) zone += 60;
  return zone;
}

char utm_band_letter(double lat_deg) {
  static const char* bands = "CDEFGHJKLMNPQRSTUVWX";
  if (lat_deg < -80.0 || lat_deg > 84.0) return '?';
  int i = static_cast<int>(std::floor((lat_deg + 80.0) / 8.0));
  if (i > 19) i = 19;  // X band extends to 84N
  return bands[i];
}

std::string UtmCoord::grid_designator(double lat_deg) const {
  return std::to_string(zone) + utm_band_letter(lat_deg);
}

UtmCoord wgs84_to_utm(const GeoPoint& p_in, std::optional<int> forced_zone) {
  const GeoPoint p = validate_geo(p_in);
  const int natural = natural_utm_zone(p.lon_deg);
  int zone = natural;
  if (forced_zone) {
    if (*forced_zone < 1 || *forced_zone > 60)
      throw DomainError("forced zone out of range");
    int d = std::abs(*forced_zone - natural);
    d = std::min(d, 60 - d);
    if (d > 1) throw DomainError("forced zone too far from natural zone");
    zone = *forced_zone;
  }

  const double phi = deg2rad(p.lat_deg);
  double dlon = p.lon_deg - central_meridian_deg(zone);
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  const double lam = deg2rad(dlon);

  const double taup = taupf(std::tan(phi));
  const double cl = std::cos(lam);
  const double xi_p = std::atan2(taup, cl);
  const double eta_p = std::asinh(std::sin(lam) / std::hypot(taup, cl));

  std::complex<double> z(xi_p, eta_p);
  std::complex<double> w = z;
  const Series& s = series();
  for (int j = 1; j <= 6; ++j) {
    w += s.alpha[j - 1] * std::sin(2.0 * j * z);
  }

  UtmCoord c;
  c.zone = zone;
  c.north = p.lat_deg >= 0.0;
  c.easting = kFalseEasting + kK0 * kRectRadius * w.imag();
  c.northing = kK0 * kRectRadius * w.real() + (c.north ? 0.0 : kFalseNorthing);
  c.alt_m = p.alt_m;
  return c;
}

GeoPoint utm_to_wgs84(const UtmCoord& c) {
  if (c.zone < 1 || c.zone > 60) throw DomainError("zone out of range");
  if (c.easting < 0.0 || c.easting > 1000000.0)
    throw DomainError("easting out of range");
  if (c.northing < 0.0 || c.northing > 10000000.0)
    throw DomainError("northing out of range");

  const double xi = (c.northing - (c.north ? 0.0 : kFalseNorthing)) /
                    (kK0 * kRectRadius);
  const double eta = (c.easting - kFalseEasting) / (kK0 * kRectRadius);

  std::complex<double> z(xi, eta);
  std::complex<double> w = z;
  const Series& s = series();
  for (int j = 1; j <= 6; ++j) {
    w -= s.beta[j - 1] * std::sin(2.0 * j * z);
  }
  const double xi_p = w.real();
  const double eta_p = w.imag();

  const double sh = std::sinh(eta_p);
  const double cx = std::cos(xi_p);
  const double taup = std::sin(xi_p) / std::hypot(sh, cx);
  const double lam = std::atan2(sh, cx);
  const double phi = std::atan(tauf(taup));

  GeoPoint p;
  p.lat_deg = rad2deg(phi);
  p.lon_deg = central_meridian_deg(c.zone) + rad2deg(lam);
  p.alt_m = c.alt_m;
  return validate_geo(p);
}

Eigen::Vector3d to_local(const UtmCoord& c, const LocalFrame& f) {
  if (c.zone != f.origin.zone || c.north != f.origin.north)
    throw DomainError("UTM zone/hemisphere mismatch with local frame");
  return {c.easting - f.origin.easting, c.northing - f.origin.northing,
          c.alt_m - f.origin.alt_m};
}

UtmCoord from_local(const Eigen::Vector3d& v, const LocalFrame& f) {
  UtmCoord c = f.origin;
  c.easting = f.origin.easting + v.x();
  c.northing = f.origin.northing + v.y();
  c.alt_m = f.origin.alt_m + v.z();
  return c;
}

}  // namespace cropmap
