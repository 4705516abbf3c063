#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "estatcom/engine.hpp"
#include "estatcom/plant.hpp"

using namespace estatcom;

namespace {

ConverterParams fullscale() { return make_preset("table1-fullscale").params; }

ConverterState charged(const ConverterParams& p) {
  ConverterState s;
  s.v_C.fill(p.v_arm_rated());
  s.precharge_bypassed = true;
  s.blocked = false;
  return s;
}

}  // namespace

TEST(Plant, ZeroModulationZeroCurrentHoldsCharge) {
  const ConverterParams p = fullscale();
  const ConverterState s = charged(p);
  ArmArray m{};
  const PlantDerivative d = plant_derivatives(s, m, Abc{}, p.V_dc_rated, p);
  for (double dv : d.dv_C) EXPECT_EQ(dv, 0.0);
}

TEST(Plant, CapacitorChargeRate) {
  const ConverterParams p = fullscale();
  ASSERT_NEAR(p.C_arm, 66.25e-6, 1e-12);
  ConverterState s = charged(p);
  s.i_arm[upper(0)] = 10.0;
  ArmArray m{};
  m[upper(0)] = 0.5;
  const PlantDerivative d = plant_derivatives(s, m, Abc{}, p.V_dc_rated, p);
  EXPECT_NEAR(d.dv_C[upper(0)], 0.5 * 10.0 / 66.25e-6, 1e-6);
  // Per-submodule view: each of the N_sm capacitors C_sm sees the same current.
  EXPECT_NEAR(d.dv_C[upper(0)], p.N_sm * 0.5 * 10.0 / p.C_sm(), 1e-6);
  EXPECT_NEAR(d.dv_C[upper(0)], 75.47e3, 5.0);
}

TEST(Plant, DcEquilibriumHasNoCirculatingCurrentDerivative) {
  const ConverterParams p = fullscale();
  ConverterState s = charged(p);
  s.dc_mc_closed = true;
  ArmArray m;
  m.fill(0.5 * p.V_dc_rated / p.v_arm_rated());
  const PlantDerivative d = plant_derivatives(s, m, Abc{}, p.V_dc_rated, p);
  for (int x = 0; x < 3; ++x) {
    EXPECT_NEAR(0.5 * (d.di_arm[upper(x)] + d.di_arm[lower(x)]), 0.0, 1e-9);
  }
}

TEST(Plant, NonFiniteInputFaults) {
  const ConverterParams p = fullscale();
  ConverterState s = charged(p);
  s.i_arm[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(plant_derivatives(s, ArmArray{}, Abc{}, p.V_dc_rated, p), PlantFault);
}

TEST(Plant, TotalInternalEnergy) {
  const ConverterParams p = fullscale();
  ConverterState s;
  EXPECT_EQ(total_internal_energy(s, p), 0.0);
  s = charged(p);
  EXPECT_NEAR(total_internal_energy(s, p), 1.272e6, 1.0);
  // Oracle: 240 submodules of 2.65 mF at 2 kV.
  EXPECT_NEAR(total_internal_energy(s, p), 240 * 0.5 * 2.65e-3 * 2e3 * 2e3, 1e-6);
  ConverterState one;
  one.v_C[upper(1)] = p.v_arm_rated();
  EXPECT_NEAR(total_internal_energy(one, p), 212e3, 1.0);
}

TEST(Grid, BalancedVoltageMagnitude) {
  const GridParams gp = fullscale().grid;
  const GridSource g(gp);
  const double peak = std::sqrt(2.0) * 132e3 / std::sqrt(3.0);
  for (double t : {0.0, 0.0031, 0.27}) {
    EXPECT_NEAR(g.voltages(t)[0], peak * std::cos(g.phase(t)), 1e-6);
  }
  EXPECT_NEAR(g.V_phase_peak_grid(), peak, 1e-6);
}

TEST(Grid, FrequencyStepIsPhaseContinuous) {
  GridSource g(fullscale().grid);
  const double t0 = 0.3;
  g.command(t0, GridCommand{59.8, 1.0, 0.0});
  const double eps = 1e-9;
  EXPECT_NEAR(g.phase(t0 - eps), g.phase(t0 + eps), 1e-6);
  const double h = 1e-4;
  const double w_before = (g.phase(t0 - h) - g.phase(t0 - 2 * h)) / h;
  const double w_after = (g.phase(t0 + 2 * h) - g.phase(t0 + h)) / h;
  EXPECT_NEAR(w_before - w_after, kTwoPi * 0.2, 1e-6);
}

TEST(Grid, ZeroMagnitude) {
  const GridSource g(fullscale().grid, GridCommand{60.0, 0.0, 0.0});
  for (double v : g.voltages(0.01)) EXPECT_EQ(v, 0.0);
}

TEST(Storage, ZeroReferenceKeepsEnergy) {
  StorageParams sp;
  sp.E_rated = 1e6;
  sp.P_limit = 1e6;
  StorageState st = make_storage(sp);
  st.P_dc = 2e5;
  const double E0 = st.E_sc;
  for (int k = 0; k < 2000; ++k) st = storage_step(st, 0.0, 1.0, 1e-4, sp, true).state;
  EXPECT_NEAR(st.P_dc, 0.0, 1e-9);
  EXPECT_NEAR(st.E_sc, E0 - 2e5 * sp.tau, 1e3);  // only the lag tail is drawn
}

TEST(Storage, UnavailableGivesZero) {
  StorageParams sp;
  sp.E_rated = 1e6;
  sp.P_limit = 2e6;
  StorageState st = make_storage(sp);
  st.available = false;
  EXPECT_EQ(storage_step(st, 1e6, 1.0, 1e-4, sp, true).state.P_dc, 0.0);
  st.available = true;
  EXPECT_EQ(storage_step(st, 1e6, 1.0, 1e-4, sp, false).state.P_dc, 0.0);
}

TEST(Storage, ConstantPowerEnergy) {
  StorageParams sp;
  sp.E_rated = 4e6;
  sp.P_limit = 2e6;
  sp.tau = 0.0;
  StorageState st = make_storage(sp);
  const double E0 = st.E_sc;
  const double dt = 1e-4;
  double trapz = 0.0;
  double prev = 1e6;
  for (int k = 0; k < 5000; ++k) {
    st = storage_step(st, 1e6, 1.0, dt, sp, true).state;
    trapz += 0.5 * dt * (prev + st.P_dc);
    prev = st.P_dc;
  }
  EXPECT_NEAR(st.E_sc - E0, -0.5e6, 1e-3);
  EXPECT_NEAR(-trapz, -0.5e6, 1e-3);
}

TEST(Storage, LeavingSocWindowDisables) {
  StorageParams sp;
  sp.E_rated = 1e3;
  sp.P_limit = 1e6;
  sp.tau = 0.0;
  StorageState st = make_storage(sp);
  bool flagged = false;
  for (int k = 0; k < 100 && st.available; ++k) {
    const auto r = storage_step(st, 1e5, 1.0, 1e-3, sp, true);
    flagged = flagged || r.became_unavailable;
    st = r.state;
  }
  EXPECT_TRUE(flagged);
  EXPECT_FALSE(st.available);
  EXPECT_EQ(st.P_dc, 0.0);
}

TEST(Plant, Rk4ConvergesAtFourthOrder) {
  const ConverterParams p = make_preset("table2-downscale").params;
  ConverterState s = charged(p);
  s.dc_mc_closed = true;
  ArmArray m;
  m.fill(0.5 * p.V_dc_rated / p.v_arm_rated());
  m[upper(0)] += 0.05;
  m[lower(1)] -= 0.05;
  const GridSource g(p.grid);
  auto run = [&](int n) {
    ConverterState x = s;
    const double T = 2e-3;
    for (int k = 0; k < n; ++k) x = rk4_step(x, m, g, k * T / n, T / n, p.V_dc_rated, p).state;
    return x.i_arm[upper(0)];
  };
  const double e1 = std::abs(run(50) - run(400));
  const double e2 = std::abs(run(100) - run(400));
  EXPECT_GT(e1 / e2, 10.0);
}
