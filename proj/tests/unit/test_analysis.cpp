#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "estatcom/analysis.hpp"
#include "estatcom/frame.hpp"
#include "estatcom/verify.hpp"

using namespace estatcom;

namespace {

constexpr double kZeta = 0.707;

Complex jw(double f_hz) { return {0.0, kTwoPi * f_hz}; }

}  // namespace

TEST(Poly, ArithmeticAndRoots) {
  EXPECT_EQ(poly::mul({1, 1}, {1, -1}), (Poly{1, 0, -1}));
  EXPECT_EQ(poly::add({1, 2}, {3}), (Poly{1, 5}));
  EXPECT_EQ(poly::trim({0, 0, 2, 1}), (Poly{2, 1}));
  auto r = poly::roots({1, -3, 2});
  ASSERT_EQ(r.size(), 2u);
  std::sort(r.begin(), r.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
  EXPECT_NEAR(r[0].real(), 1.0, 1e-12);
  EXPECT_NEAR(r[1].real(), 2.0, 1e-12);
}

TEST(ApcClosedLoop, Examples) {
  const double wn = kTwoPi * 3.0;
  const TransferFunction G = make_apc_closed_loop(kZeta, wn);
  EXPECT_DOUBLE_EQ(G.dc_gain(), 1.0);
  EXPECT_NEAR(std::abs(G(Complex(0.0, wn))), std::sqrt(1 + 4 * kZeta * kZeta) / (2 * kZeta), 1e-12);
  EXPECT_NEAR(20 * std::log10(std::abs(G(Complex(0.0, wn)))), 1.75, 0.02);
  const double w = 1e6;
  EXPECT_NEAR(std::abs(G(Complex(0.0, w))), 2 * kZeta * wn / w, 1e-9);
}

TEST(LoopGain, Examples) {
  const TransferFunction one = TransferFunction::constant(1.0);
  const TransferFunction L = make_loop_gain(0.0, 1.0, one);
  for (double f : {0.1, 1.0, 7.0}) {
    const Complex s = jw(f);
    EXPECT_NEAR(std::abs(L(s) - 1.0 / (s * s)), 0.0, 1e-12 * std::abs(1.0 / (s * s)));
  }
  const double K_PW = 3.0, K_IW = 5.0;
  const TransferFunction pi = make_loop_gain(K_PW, K_IW, one);
  for (double f : {0.05, 0.4, 3.0, 40.0}) {
    const double w = kTwoPi * f;
    const double expected = -90.0 - std::atan(K_IW / (K_PW * w)) * 180.0 / kPi;
    EXPECT_NEAR(unwrapped_phase_deg(pi, f), expected, 1e-9);
  }
  const LoopSet ls = build_loops({});
  EXPECT_EQ(ls.loop_gain.den_degree(), ls.apc_cl.den_degree() + 2);
  EXPECT_GT(std::abs(ls.loop_gain.at_hz(1e-6)), 1e9);
}

TEST(Margins, SeparationCases) {
  LoopCase c;
  c.apc_bw = 3.0;
  c.tec_bw = 0.3;
  MarginReport r = margins(build_loops(c).loop_gain);
  EXPECT_TRUE(r.stable);
  EXPECT_GE(r.phase_margin_deg, 70.8);
  EXPECT_LE(r.phase_margin_deg, 80.8);

  c.tec_bw = 10.0;
  r = margins(build_loops(c).loop_gain);
  EXPECT_FALSE(r.stable);
  EXPECT_GE(r.phase_margin_deg, -6.7);
  EXPECT_LE(r.phase_margin_deg, 3.3);
}

TEST(Margins, FirstOrderLagAtUnityDcGain) {
  const MarginReport r = margins(TransferFunction({1.0}, {1.0, 1.0}));
  EXPECT_TRUE(r.stable);
  if (r.has_crossover) {
    EXPECT_NEAR(r.phase_margin_deg, 180.0, 0.1);
  }
}

TEST(Margins, StableFlagMatchesPoles) {
  for (double tec : {0.1, 1.0, 2.0, 4.0, 8.0, 20.0}) {
    LoopCase c;
    c.tec_bw = tec;
    const MarginReport r = margins(build_loops(c).loop_gain);
    bool lhp = true;
    for (Complex p : r.closed_loop_poles) lhp = lhp && p.real() < 0.0;
    EXPECT_EQ(r.stable, lhp) << "tec_bw " << tec;
  }
}

// With wide separation the margin is flat to within ~0.013 deg (the APC peaking
// nudges the crossover), so the scan allows that much.
TEST(Margins, PhaseMarginNonIncreasingInTecBandwidth) {
  for (double apc : {1.0, 3.0, 8.0}) {
    double prev = 1e9;
    for (double tec = 0.05; tec < 3.0 * apc; tec *= 1.15) {
      LoopCase c;
      c.apc_bw = apc;
      c.tec_bw = tec;
      const double pm = margins(build_loops(c).loop_gain).phase_margin_deg;
      EXPECT_LE(pm, prev + 0.05) << "apc " << apc << " tec " << tec;
      prev = pm;
    }
  }
}

TEST(TecClosedLoop, DcGainAndFeedforwardCollapse) {
  const LoopSet ls = build_loops({3.0, 10.0});
  const double cc = kTwoPi * 200.0;
  for (bool ff : {false, true}) {
    EXPECT_NEAR(make_tec_closed_loop(ls.tec.K_PW, ls.tec.K_IW, ls.apc_cl, ff, cc).dc_gain(), 1.0, 1e-12);
  }
  // An ideal current loop turns the decoupled APC path into unity.
  const TransferFunction apc_ff = make_apc_with_feedforward(ls.apc_cl, 1e12);
  for (double f : {0.1, 3.0, 30.0}) EXPECT_NEAR(std::abs(apc_ff.at_hz(f) - 1.0), 0.0, 1e-6);
}

TEST(InertialTf, Examples) {
  const double P_max = 1e4;
  const ApcGains g = gains_from_bandwidth(2.0, kZeta, P_max);
  const TransferFunction G = make_inertial_tf(P_max, g.K_P, g.K_I);
  EXPECT_EQ(G.dc_gain(), 0.0);

  // Final value of the response to a frequency ramp of rate R rad/s^2.
  const double R = 0.5, dt = 1e-3;
  std::vector<double> u(20000);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = R * k * dt;
  const auto y = lsim(G, u, dt);
  EXPECT_NEAR(y.back(), -R / g.K_I, 1e-6 * R / g.K_I);

  // Same denominator, doubled P_max: the peak doubles.
  const TransferFunction G2 = make_inertial_tf(2 * P_max, g.K_P / 2, g.K_I / 2);
  const double wn = std::sqrt(g.K_I * P_max);
  EXPECT_NEAR(std::abs(G2(Complex(0, wn))), 2.0 * std::abs(G(Complex(0, wn))), 1e-9 * std::abs(G(Complex(0, wn))));
}

TEST(ConvFreqTf, DcGainsAndIdentity) {
  const double P_max = 3.0;
  const ApcGains g = gains_from_bandwidth(3.0, kZeta, P_max);
  const TransferFunction G7 = make_convfreq_tf(P_max, g.K_P, g.K_I);
  const TransferFunction G9 = make_convfreq_p_tf(P_max, g.K_P, g.K_I);
  EXPECT_NEAR(G7.dc_gain(), -1.0, 1e-12);
  EXPECT_EQ(G9.dc_gain(), 0.0);
  // Same denominator, numerators differ by the integral branch exactly.
  EXPECT_EQ(G7.den(), G9.den());
  const Poly diff = poly::sub(G7.num(), G9.num());
  EXPECT_EQ(poly::trim(diff), (Poly{-g.K_I * P_max}));
}

TEST(GainMappings, Examples) {
  EXPECT_NEAR(pmax(1.0, 1.0, 0.3), 3.333, 1e-3);
  const ApcGains g = gains_from_bandwidth(3.0, kZeta, 3.333);
  EXPECT_NEAR(std::sqrt(g.K_I * 3.333), kTwoPi * 3.0, 1e-12);
  EXPECT_NEAR(g.K_P * 3.333, 2 * kZeta * kTwoPi * 3.0, 1e-12);
  const TecGains t = tec_gains_from_bandwidth(1.0, {1.0, 10.0});
  EXPECT_NEAR(t.K_PW, kTwoPi, 1e-12);
  EXPECT_NEAR(t.K_IW, kTwoPi * kTwoPi / 10.0, 1e-12);
  const ApcGains h = apc_gains_from_inertia(10.0, 4e3, kTwoPi * 60.0, 1e4);
  EXPECT_NEAR(h.K_I, kTwoPi * 60.0 / (2 * 10.0 * 4e3), 1e-15);
  EXPECT_NEAR(h.K_P, 2 * 0.707 * std::sqrt(h.K_I * 1e4) / 1e4, 1e-15);
}

TEST(Bode, Examples) {
  FrequencyResponse r = bode(TransferFunction::constant(1.0), log_frequency_grid());
  EXPECT_EQ(r.freq_hz.size(), 400u);
  for (std::size_t k = 0; k < r.freq_hz.size(); ++k) {
    EXPECT_EQ(r.mag_db[k], 0.0);
    EXPECT_EQ(r.phase_deg[k], 0.0);
  }
  r = bode(TransferFunction({1.0}, {1.0, 0.0}), {1.0 / kTwoPi});
  EXPECT_NEAR(r.mag_db[0], 0.0, 1e-12);
  EXPECT_NEAR(r.phase_deg[0], -90.0, 1e-12);

  const TransferFunction G = make_apc_closed_loop(kZeta, kTwoPi * 3.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-2.0, 3.0);
  std::vector<double> f(100);
  for (double& x : f) x = std::pow(10.0, U(rng));
  r = bode(G, f);
  const double wn = kTwoPi * 3.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Complex s = jw(f[k]);
    const Complex ref = (2 * kZeta * wn * s + wn * wn) / (s * s + 2 * kZeta * wn * s + wn * wn);
    EXPECT_NEAR(r.mag_db[k], 20 * std::log10(std::abs(ref)), 1e-10);
    EXPECT_NEAR(r.phase_deg[k], std::arg(ref) * 180.0 / kPi, 1e-10);
  }
}

TEST(Bode, PhaseUnwrapsAndFlagsPoles) {
  const LoopSet ls = build_loops({3.0, 10.0});
  const FrequencyResponse r = bode(ls.loop_gain, log_frequency_grid(0.01, 1000.0, 800));
  for (std::size_t k = 1; k < r.phase_deg.size(); ++k) EXPECT_LT(std::abs(r.phase_deg[k] - r.phase_deg[k - 1]), 90.0);
  EXPECT_LT(r.phase_deg.back(), -180.0);

  const FrequencyResponse p = bode(TransferFunction({1.0}, {1.0, 0.0, 1.0}), {1.0 / kTwoPi});
  EXPECT_TRUE(p.at_pole[0]);
}

TEST(Bode, CsvHeader) {
  std::ostringstream os;
  write_bode_csv(os, bode(TransferFunction::constant(2.0), {1.0, 2.0}));
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "freq_hz,mag_db,phase_deg");
}

TEST(Properties, RationalClosure) {
  const auto c = verify::rational_closure_property(99, 200);
  EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Properties, StabilityAgreesWithTimeDomain) {
  const auto c = verify::stability_agreement_property(17, 10);
  EXPECT_TRUE(c.pass) << c.detail;
}
