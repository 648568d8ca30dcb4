#pragma once

#include <cmath>
#include <numbers>

namespace cropmap {

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Shortest-arc interpolation between two angles, u in [0, 1].
inline double lerp_angle(double from, double to, double u) {
  return wrap_angle(from + wrap_angle(to - from) * u);
}

}  // namespace cropmap
