#include <gtest/gtest.h>

#include <cmath>

#include "estatcom/frame.hpp"
#include "estatcom/verify.hpp"

using namespace estatcom;

TEST(Frame, AlignedBalancedSetMapsToPeak) {
  for (double theta : {0.0, 0.3, 2.0, -2.9}) {
    const Dq dq = park(balanced_set(325.0, theta), theta);
    EXPECT_NEAR(dq.d, 325.0, 1e-10);
    EXPECT_NEAR(dq.q, 0.0, 1e-10);
    EXPECT_NEAR(dq.zero, 0.0, 1e-10);
  }
}

TEST(Frame, LeadingSetMapsToPositiveQ) {
  const double theta = 0.7;
  const Dq dq = park(balanced_set(10.0, theta + kPi / 2.0), theta);
  EXPECT_NEAR(dq.d, 0.0, 1e-12);
  EXPECT_NEAR(dq.q, 10.0, 1e-12);
}

TEST(Frame, RoundTripIncludingZeroSequence) {
  const Abc x{3.0, -1.25, 0.5};
  const Abc y = inverse_park(park(x, 1.1), 1.1);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(x[k], y[k], 1e-12);
}

TEST(Frame, RandomizedRoundTrip) {
  const auto c = verify::frame_round_trip_property(5, 5000);
  EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Frame, WrapAngle) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_angle(3.0 * kTwoPi + 0.5), 0.5, 1e-12);
}
