#pragma once

#include <array>

namespace estatcom {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kTwoPiOver3 = kTwoPi / 3.0;

using Abc = std::array<double, 3>;

/// Synchronous-frame quantity. `zero` carries the zero-sequence component so
/// that the abc -> dq0 -> abc round trip is exact.
struct Dq {
  double d = 0.0;
  double q = 0.0;
  double zero = 0.0;
};

/// Amplitude-invariant Park transform. A balanced set a = A cos(theta),
/// b = A cos(theta - 2pi/3), c = A cos(theta + 2pi/3) maps to (A, 0).
/// A set leading theta by 90 degrees maps to (0, +A).
Dq park(const Abc& abc, double theta);
Abc inverse_park(const Dq& dq, double theta);

/// Balanced three-phase set with peak `amplitude` and phase-a angle `theta`.
Abc balanced_set(double amplitude, double theta);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

}  // namespace estatcom
