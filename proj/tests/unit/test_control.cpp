#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "estatcom/controller.hpp"
#include "estatcom/engine.hpp"
#include "estatcom/verify.hpp"

using namespace estatcom;

TEST(Pac, Examples) {
  EXPECT_DOUBLE_EQ(compute_pac({1, 0}, {1, 0}), 1.5);
  EXPECT_DOUBLE_EQ(compute_pac({0.9, 0.1}, {0, 0}), 0.0);
  EXPECT_NEAR(compute_pac({0.9, 0.1}, {0.5, -0.2}), 0.645, 1e-15);
}

TEST(Feedforward, Examples) {
  EXPECT_DOUBLE_EQ(feedforward_current(1.5, {1, 0}, 7.0, 0.1).i_dref_ff, 1.0);
  EXPECT_NEAR(feedforward_current(0.0, {1, 0.1}, 0.5, 0.1).i_dref_ff, -0.05, 1e-15);
}

TEST(Feedforward, FreezesBelowVoltageFloor) {
  const auto r = feedforward_current(10.0, {0.05, 0.0}, 0.0, 0.1, 3.5);
  EXPECT_TRUE(r.frozen);
  EXPECT_EQ(r.i_dref_ff, 3.5);
}

TEST(Feedforward, InverseProperty) {
  const auto c = verify::feedforward_inverse_property(21, 5000);
  EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Tec, Examples) {
  ControlGains g;
  g.P_tec_max = 1e9;
  PiState s;
  EXPECT_EQ(tec_step(s, g, 5e3, 5e3, 1e-4), 0.0);

  g.K_PW = 10.0;
  s = {};
  EXPECT_DOUBLE_EQ(tec_step(s, g, 0.0, 1e3, 1e-4), 10e3);

  g.K_PW = 0.0;
  g.K_IW = 2.0;
  s = {};
  for (int k = 0; k < 5000; ++k) tec_step(s, g, 0.0, 1e3, 1e-4);
  EXPECT_NEAR(s.integral, 1e3, 1e-6);
  EXPECT_NEAR(tec_step(s, g, 0.0, 1e3, 1e-4), 1e3, 1e-6);
}

TEST(Tec, AntiWindupBoundsIntegrator) {
  ControlGains g;
  g.K_PW = 1.0;
  g.K_IW = 100.0;
  g.P_tec_max = 50.0;
  PiState s;
  for (int k = 0; k < 10000; ++k) EXPECT_LE(tec_step(s, g, 0.0, 1e3, 1e-3), 50.0);
  EXPECT_LE(std::abs(s.integral), 50.0);
  EXPECT_TRUE(s.clamped);
}

TEST(Apc, Examples) {
  ControlGains g;
  g.K_P = 1e-7;
  g.K_I = 1e-6;
  const double w = kTwoPi * 60.0;
  ApcState s;
  EXPECT_EQ(apc_step(s, g, w, 5.0, 5.0, 1e-4).omega_conv, w);
  const ApcState r = apc_step(s, g, w, 1e6, 0.0, 1e-4);
  EXPECT_NEAR(r.omega_conv_P, 0.1, 1e-15);
  // Exact up to the rounding of adding omega_nom.
  EXPECT_NEAR(r.omega_conv - w, r.omega_conv_P + r.omega_conv_I, 4 * std::numeric_limits<double>::epsilon() * w);
}

TEST(Apc, SinusoidalResponseMatchesPiGain) {
  ControlGains g;
  g.K_P = 2e-6;
  g.K_I = 3e-4;
  const double w_nom = kTwoPi * 60.0;
  const double w = kTwoPi * 5.0;
  const double dt = 1e-5;
  ApcState s;
  double peak = 0.0;
  for (int k = 0; k < 200000; ++k) {
    const double t = k * dt;
    s = apc_step(s, g, w_nom, 1e3 * std::cos(w * t), 0.0, dt);
    if (t > 1.0) peak = std::max(peak, std::abs(s.omega_conv - w_nom));
  }
  const double expected = std::abs(std::complex<double>(g.K_P, -g.K_I / w)) * 1e3;
  EXPECT_NEAR(peak, expected, 0.01 * expected);
}

TEST(Apc, StepIdentity) {
  const auto c = verify::apc_identity_property();
  EXPECT_TRUE(c.pass) << c.detail;
}

TEST(Inertial, DeadbandAndMapping) {
  ControlGains g;
  g.K_P = 1e-6;
  g.deadband_width = 0.01;
  EXPECT_EQ(inertial_power_reference(0.009, g, Mode::EStatcom, true), 0.0);
  EXPECT_EQ(inertial_power_reference(-0.01, g, Mode::EStatcom, true), 0.0);
  // Continuous at the band edges.
  EXPECT_NEAR(inertial_power_reference(0.01 + 1e-12, g, Mode::EStatcom, true), 0.0, 1e-5);

  g.deadband_width = 0.0;
  const double e = 2.5e4;  // P_target - P_ac
  EXPECT_NEAR(inertial_power_reference(g.K_P * e, g, Mode::EStatcom, true), -e, 1e-9);
  EXPECT_EQ(inertial_power_reference(g.K_P * e, g, Mode::Statcom, true), 0.0);
  EXPECT_EQ(inertial_power_reference(g.K_P * e, g, Mode::EStatcom, false), 0.0);

  g.K_P = 0.0;
  EXPECT_THROW(inertial_power_reference(0.1, g, Mode::EStatcom, true), std::invalid_argument);
}

TEST(Soc, Examples) {
  PiState s;
  PiGains z;
  EXPECT_EQ(soc_regulation_step(s, {1e5, 10.0}, 0.5, 0.5, 1e-3, 1e9), 0.0);
  EXPECT_EQ(soc_regulation_step(s, z, 0.9, 0.5, 1e-3, 1e9), 0.0);
  s = {};
  EXPECT_NEAR(soc_regulation_step(s, {1e5, 0.0}, 0.6, 0.5, 1e-3, 1e9), 1e4, 1e-6);
}

TEST(Rpc, Examples) {
  ControlGains g;
  g.E_max = 2.0;
  PiState s;
  EXPECT_EQ(rpc_step(s, g, 1.0, 500.0, 500.0, 1e-3), 1.0);
  EXPECT_EQ(rpc_step(s, g, 1.0, 900.0, 0.0, 1e-3), 1.0);  // zero gains

  g.rpc = {1e-4, 1e-2};
  s = {};
  double prev = 1.0;
  for (int k = 0; k < 50; ++k) {
    const double E = rpc_step(s, g, 1.0, 1000.0, 0.0, 1e-3);
    EXPECT_GE(E, prev);
    prev = E;
  }
  EXPECT_GT(prev, 1.0);
}

namespace {

ControlGains admittance_gains() {
  ControlGains g;
  g.va = {0.5, 2e-3};
  g.I_max = 1e6;
  return g;
}

}  // namespace

TEST(VirtualAdmittance, ZeroDriveDecays) {
  const ControlGains g = admittance_gains();
  Dq i{3.0, -1.0};
  Dq out;
  for (int k = 0; k < 2000; ++k) out = virtual_admittance_step(i, g, 10.0, 377.0, {10.0, 0.0}, 0.0, 1e-4).i_ref;
  EXPECT_NEAR(out.d, 0.0, 1e-9);
  EXPECT_NEAR(out.q, 0.0, 1e-9);
}

TEST(VirtualAdmittance, DcGain) {
  const ControlGains g = admittance_gains();
  Dq i;
  Dq out;
  for (int k = 0; k < 4000; ++k) out = virtual_admittance_step(i, g, 12.0, 0.0, {10.0, 0.0}, 0.0, 1e-4).i_ref;
  EXPECT_NEAR(out.d, 2.0 / 0.5, 1e-9);
  EXPECT_NEAR(out.q, 0.0, 1e-12);
}

TEST(VirtualAdmittance, FeedforwardSuperposes) {
  const ControlGains g = admittance_gains();
  Dq i;
  const auto r = virtual_admittance_step(i, g, 10.0, 377.0, {10.0, 0.0}, 5.0, 1e-4);
  EXPECT_DOUBLE_EQ(r.i_ref.d, 5.0);
  EXPECT_DOUBLE_EQ(r.i_ref.q, 0.0);
}

TEST(VirtualAdmittance, ClampKeepsFeedforwardPriority) {
  ControlGains g = admittance_gains();
  g.I_max = 6.0;
  Dq i{0.0, 4.0};
  const auto r = virtual_admittance_step(i, g, 10.0, 0.0, {10.0, 0.0}, 5.0, 1e-9);
  EXPECT_TRUE(r.clamped);
  EXPECT_NEAR(std::hypot(r.i_ref.d, r.i_ref.q), 6.0, 1e-9);
  EXPECT_NEAR(r.i_ref.d, 5.0, 1e-6);
}

TEST(CurrentController, ZeroErrorPassesVoltage) {
  ControlGains g;
  g.cc = {2.0, 50.0};
  g.L_eq = 1e-2;
  std::array<PiState, 2> s{};
  const Dq v{100.0, -3.0};
  auto r = current_controller_step(s, g, {0, 0}, {0, 0}, v, 377.0, 1e-4, 1e9);
  EXPECT_DOUBLE_EQ(r.v_out_ref.d, v.d);
  EXPECT_DOUBLE_EQ(r.v_out_ref.q, v.q);
  r = current_controller_step(s, g, {4, 2}, {4, 2}, v, 0.0, 1e-4, 1e9);
  EXPECT_DOUBLE_EQ(r.v_out_ref.d, v.d);
  EXPECT_DOUBLE_EQ(r.v_out_ref.q, v.q);
}

TEST(CurrentController, FirstOrderClosedLoop) {
  const ConverterParams p = make_preset("table2-downscale").params;
  ControlDesign d;
  const ControlGains g = design_gains(p, d);
  const double L = p.L_eq(), R = p.R_eq();
  const double w = p.omega_nominal();
  const double dt = 1e-6;
  const double tau = 1.0 / g.cc_bandwidth;
  std::array<PiState, 2> s{};
  Dq i;
  const Dq v{50.0, 0.0};
  const Dq ref{5.0, 0.0};
  double at_tau = 0.0;
  const long n_tau = std::lround(tau / dt);
  for (long k = 0; k <= 5 * n_tau; ++k) {
    if (k == n_tau) at_tau = i.d;
    const Dq u = current_controller_step(s, g, ref, i, v, w, dt, 1e9).v_out_ref;
    // Rotating-frame R-L between the converter output and the PCC.
    const Dq di{(u.d - v.d - R * i.d + w * L * i.q) / L, (u.q - v.q - R * i.q - w * L * i.d) / L};
    i.d += dt * di.d;
    i.q += dt * di.q;
  }
  EXPECT_NEAR(at_tau / ref.d, 1.0 - std::exp(-1.0), 0.05);
  EXPECT_NEAR(i.d, ref.d, 0.05 * ref.d);
  EXPECT_NEAR(i.q, 0.0, 0.05 * ref.d);
}

TEST(Modulation, DcEquilibrium) {
  ArmArray v_C;
  v_C.fill(250.0);
  const auto r = modulation({0, 0}, {0, 0, 0}, 0.3, v_C, 250.0, 1.0, 10.0);
  for (double m : r.m) EXPECT_DOUBLE_EQ(m, 0.5);
  EXPECT_FALSE(r.saturated);
}

TEST(Modulation, ReconstructsArmVoltages) {
  const ArmArray v_C{240, 255, 250, 245, 260, 238};
  const Dq ref{60.0, -20.0};
  const Abc corr{3.0, -1.0, 0.5};
  const double theta = 1.3, v_dc = 250.0;
  const auto r = modulation(ref, corr, theta, v_C, v_dc, 1.0, 10.0);
  const Abc v_out = inverse_park({ref.d, ref.q, 0.0}, theta);
  for (int x = 0; x < 3; ++x) {
    const double v_com = 0.5 * v_dc + corr[x];
    EXPECT_NEAR(r.m[upper(x)] * v_C[upper(x)], v_com - v_out[x], 1e-12);
    EXPECT_NEAR(r.m[lower(x)] * v_C[lower(x)], v_com + v_out[x], 1e-12);
  }
}

TEST(Modulation, ClampAndFloor) {
  ArmArray v_C;
  v_C.fill(100.0);
  const auto r = modulation({300.0, 0.0}, {0, 0, 0}, 0.0, v_C, 100.0, 0.95, 10.0);
  EXPECT_TRUE(r.saturated);
  EXPECT_DOUBLE_EQ(r.m[lower(0)], 0.95);
  v_C[3] = 5.0;
  EXPECT_THROW(modulation({0, 0}, {0, 0, 0}, 0.0, v_C, 100.0, 1.0, 10.0), std::runtime_error);
}

TEST(Balancing, EqualEnergiesNoCorrection) {
  ControlGains g;
  g.bal_leg = {1.0, 1.0};
  g.bal_arm = {1.0, 1.0};
  g.circ = {1.0, 100.0};
  g.v_corr_max = 50.0;
  BalancingState s;
  BalancingInputs in;
  in.i_dc_ref = 6.0;
  in.v_dc = 250.0;
  in.E_peak = 90.0;
  in.i_arm.fill(2.0);
  in.emf = balanced_set(90.0, 0.4);
  const auto r = balancing_and_circulating_step(s, g, in, 1e-4);
  for (double v : r.v_corr) EXPECT_DOUBLE_EQ(v, 0.0);
}

namespace {

// Closed-loop arm imbalance after `seconds` with the converter at rated energy
// and the dc MC closed; returns (initial, final) |W_au - W_al|.
std::pair<double, double> arm_imbalance(bool balancing, double seconds) {
  const ConverterParams p = make_preset("table2-downscale").params;
  ControlDesign d;
  ControlSetpoints sp;
  sp.W_ref = p.W_rated();
  const double dt = 100e-6;
  GridSource grid(p.grid);
  ConverterState s;
  s.v_C.fill(p.v_arm_rated());
  s.v_C[upper(0)] *= 1.04;
  s.v_C[lower(0)] *= 0.97;
  s.precharge_bypassed = true;
  s.blocked = false;
  s.dc_mc_closed = true;
  Controller c(p, d, sp, Mode::EStatcom, dt);
  c.enable_energy_boost(grid.converter_side(0.0));
  if (balancing) c.enable_balancing();
  auto diff = [&] { return std::abs(arm_energy(s.v_C[upper(0)], p) - arm_energy(s.v_C[lower(0)], p)); };
  const double d0 = diff();
  const long steps = std::lround(seconds / dt);
  for (long k = 0; k < steps; ++k) {
    ControllerInput in;
    in.plant = &s;
    in.v_pcc = grid.converter_side(k * dt);
    in.storage_available = true;
    const ControllerOutput out = c.step(in);
    for (int j = 0; j < 5; ++j) s = rk4_step(s, out.m, grid, k * dt + j * dt / 5, dt / 5, p.V_dc_rated, p).state;
  }
  return {d0, diff()};
}

}  // namespace

TEST(Balancing, ArmImbalanceDecays) {
  const auto [d0, d1] = arm_imbalance(true, 2.0);
  EXPECT_LT(d1, 0.1 * d0);
}

TEST(Balancing, DisabledImbalancePersists) {
  const auto [d0, d1] = arm_imbalance(false, 2.0);
  EXPECT_GT(d1, 0.5 * d0);
}

TEST(Gains, DesignRejectsBadInputs) {
  const ConverterParams p = make_preset("table2-downscale").params;
  ControlDesign d;
  d.W_ref_ramp_pu = -1.0;
  EXPECT_THROW(design_gains(p, d), std::invalid_argument);
  ControlGains g;
  g.va = {0.1, 1e-3};
  g.I_max = 1.0;
  g.H = 5.0;
  EXPECT_THROW(g.validate(Mode::EStatcom), std::invalid_argument);
  EXPECT_NO_THROW(g.validate(Mode::Statcom));
}
