#include "estatcom/frame.hpp"

#include <cmath>

namespace estatcom {

Dq park(const Abc& abc, double theta) {
  const double ca = std::cos(theta);
  const double cb = std::cos(theta - kTwoPiOver3);
  const double cc = std::cos(theta + kTwoPiOver3);
  const double sa = std::sin(theta);
  const double sb = std::sin(theta - kTwoPiOver3);
  const double sc = std::sin(theta + kTwoPiOver3);
  Dq out;
  out.d = (2.0 / 3.0) * (abc[0] * ca + abc[1] * cb + abc[2] * cc);
  out.q = -(2.0 / 3.0) * (abc[0] * sa + abc[1] * sb + abc[2] * sc);
  out.zero = (abc[0] + abc[1] + abc[2]) / 3.0;
  return out;
}

Abc inverse_park(const Dq& dq, double theta) {
  Abc out;
  for (int k = 0; k < 3; ++k) {
    const double angle = theta - k * kTwoPiOver3;
    out[k] = dq.d * std::cos(angle) - dq.q * std::sin(angle) + dq.zero;
  }
  return out;
}

Abc balanced_set(double amplitude, double theta) {
  return {amplitude * std::cos(theta), amplitude * std::cos(theta - kTwoPiOver3),
          amplitude * std::cos(theta + kTwoPiOver3)};
}

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -kPi) wrapped += kTwoPi;
  return wrapped;
}

}  // namespace estatcom
