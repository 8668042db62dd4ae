#include "lfs/angles.hpp"

#include <cmath>

#include "lfs/types.hpp"

namespace lfs {

double angle_diff(double theta1, double theta2) noexcept {
  const double d = theta1 - theta2;
  if (d >= -kPi && d < kPi) {
    return std::abs(d);
  }
  return kTwoPi - std::abs(d);
}

double wrap_two_pi(double angle) noexcept {
  if (angle >= 0.0 && angle < kTwoPi) {
    return angle;
  }
  if (angle >= kTwoPi && angle < 2.0 * kTwoPi) {
    return angle - kTwoPi;  // exact, same as fmod
  }
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) {
    a += kTwoPi;
  }
  // fmod of a tiny negative value can round up to exactly 2pi
  if (a >= kTwoPi) {
    a = 0.0;
  }
  return a;
}

double wrap_pi(double angle) noexcept {
  double a = std::fmod(angle, kPi);
  if (a < 0.0) {
    a += kPi;
  }
  if (a >= kPi) {
    a = 0.0;
  }
  return a;
}

double flow_to_minutia_angle(double flow) noexcept { return wrap_two_pi(wrap_pi(flow)); }

double minutia_to_flow_angle(double theta) noexcept { return wrap_pi(theta); }

double circular_mean(std::span<const double> angles) noexcept {
  double sx = 0.0;
  double sy = 0.0;
  for (double a : angles) {
    sx += std::cos(a);
    sy += std::sin(a);
  }
  if (std::abs(sx) < 1e-15 && std::abs(sy) < 1e-15) {
    return 0.0;
  }
  return wrap_two_pi(std::atan2(sy, sx));
}

}  // namespace lfs
