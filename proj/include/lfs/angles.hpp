#pragma once

#include <span>

namespace lfs {

/// Orientation difference in [0, pi] between two angles in [0, 2pi).
double angle_diff(double theta1, double theta2) noexcept;

/// Maps any finite angle into [0, 2pi).
double wrap_two_pi(double angle) noexcept;

/// Maps any finite angle into [0, pi).
double wrap_pi(double angle) noexcept;

// Ridge flow lives in [0, pi) and minutia orientation in [0, 2pi). Lifting
// assigns the flow angle directly; it is applied identically on the latent
// and reference sides.
double flow_to_minutia_angle(double flow) noexcept;
double minutia_to_flow_angle(double theta) noexcept;

/// Circular mean in [0, 2pi); returns 0 for an empty or perfectly balanced set.
double circular_mean(std::span<const double> angles) noexcept;

}  // namespace lfs
