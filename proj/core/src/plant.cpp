#include "estatcom/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace estatcom {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string("ConverterParams.") + name + " must be positive");
  }
}

bool all_finite(const ArmArray& values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double blocked_scale(const ConverterParams& p) {
  return p.blocked_current_scale > 0.0 ? p.blocked_current_scale : 0.02 * p.I_peak_rated();
}

}  // namespace

void ConverterParams::validate() const {
  require_positive(R_arm, "R_arm");
  require_positive(L_arm, "L_arm");
  require_positive(C_arm, "C_arm");
  if (N_sm <= 0) throw std::invalid_argument("ConverterParams.N_sm must be positive");
  require_positive(V_sm_rated, "V_sm_rated");
  require_positive(V_dc_rated, "V_dc_rated");
  require_positive(R_precharge, "R_precharge");
  require_positive(grid.V_ll_rms, "grid.V_ll_rms");
  require_positive(grid.f_nominal, "grid.f_nominal");
  require_positive(grid.L_grid, "grid.L_grid");
  require_positive(grid.R_grid, "grid.R_grid");
  require_positive(grid.turns_ratio, "grid.turns_ratio");
  require_positive(S_rated, "S_rated");
  require_positive(m_max, "m_max");
  if (V_dc_rated > N_sm * V_sm_rated) {
    throw std::invalid_argument(
        "ConverterParams.V_dc_rated exceeds N_sm * V_sm_rated; the arms cannot synthesize the dc bus");
  }
}

double ConverterParams::V_phase_peak() const {
  return std::sqrt(2.0) * grid.V_ll_rms / (std::sqrt(3.0) * grid.turns_ratio);
}

double arm_energy(double v_C, const ConverterParams& params) {
  return 0.5 * params.C_arm * v_C * v_C;
}

double total_internal_energy(const ConverterState& state, const ConverterParams& params) {
  double sum = 0.0;
  for (double v : state.v_C) sum += v * v;
  return 0.5 * params.C_arm * sum;
}

PlantDerivative plant_derivatives(const ConverterState& state, const ArmArray& m, const Abc& v_grid,
                                  double v_dc_source, const ConverterParams& params) {
  if (!all_finite(state.i_arm) || !all_finite(state.v_C) || !all_finite(m) ||
      !std::isfinite(v_grid[0]) || !std::isfinite(v_grid[1]) || !std::isfinite(v_grid[2]) ||
      !std::isfinite(v_dc_source)) {
    throw PlantFault("non-finite plant input or state");
  }

  PlantDerivative out;
  ArmArray arm_current_gain{};  // capacitor current per unit arm current
  if (state.blocked) {
    const double scale = blocked_scale(params);
    for (int k = 0; k < kArms; ++k) {
      const double g = std::tanh(state.i_arm[k] / scale);
      arm_current_gain[k] = g;
      out.v_arm[k] = g * state.v_C[k];
    }
  } else {
    for (int k = 0; k < kArms; ++k) {
      double mk = m[k];
      if (mk > params.m_max || mk < -params.m_max) {
        out.saturated = true;
        mk = std::clamp(mk, -params.m_max, params.m_max);
      }
      arm_current_gain[k] = mk;
      out.v_arm[k] = mk * state.v_C[k];
    }
  }

  const double R = params.R_arm;
  const double L = params.L_arm;
  const double R_ac = params.grid.R_grid + (state.precharge_bypassed ? 0.0 : params.R_precharge);
  const double L_ac = 0.5 * L + params.grid.L_grid;

  Abc emf{}, arm_sum{}, i_s{}, i_c{};
  for (int x = 0; x < 3; ++x) {
    emf[x] = 0.5 * (out.v_arm[lower(x)] - out.v_arm[upper(x)]);
    arm_sum[x] = out.v_arm[upper(x)] + out.v_arm[lower(x)];
    i_s[x] = ac_current(state, x);
    i_c[x] = circulating_current(state, x);
  }
  const double mean_emf = (emf[0] + emf[1] + emf[2]) / 3.0;
  const double mean_grid = (v_grid[0] + v_grid[1] + v_grid[2]) / 3.0;
  const double mean_sum = (arm_sum[0] + arm_sum[1] + arm_sum[2]) / 3.0;
  const double mean_ic = (i_c[0] + i_c[1] + i_c[2]) / 3.0;

  // Isolated neutral: the zero-sequence of the emf sets the midpoint offset.
  out.v_dc = state.dc_mc_closed ? v_dc_source : mean_sum + 2.0 * R * mean_ic;

  for (int x = 0; x < 3; ++x) {
    const double di_s = ((emf[x] - mean_emf) - (v_grid[x] - mean_grid) - (0.5 * R + R_ac) * i_s[x]) / L_ac;
    const double di_c = (out.v_dc - arm_sum[x] - 2.0 * R * i_c[x]) / (2.0 * L);
    out.di_arm[upper(x)] = di_c + 0.5 * di_s;
    out.di_arm[lower(x)] = di_c - 0.5 * di_s;
    out.v_node[x] = emf[x] - 0.5 * R * i_s[x] - 0.5 * L * di_s;
  }
  for (int k = 0; k < kArms; ++k) {
    out.dv_C[k] = arm_current_gain[k] * state.i_arm[k] / params.C_arm;
  }
  return out;
}

void update_dc_terminal(ConverterState& state, const ArmArray& m, const Abc& v_grid,
                        double v_dc_source, const ConverterParams& params) {
  const PlantDerivative d = plant_derivatives(state, m, v_grid, v_dc_source, params);
  state.v_dc = d.v_dc;
  if (state.dc_mc_closed) {
    state.i_dc = circulating_current(state, 0) + circulating_current(state, 1) +
                 circulating_current(state, 2);
  } else {
    state.i_dc = 0.0;
  }
}

PlantStepResult rk4_step(const ConverterState& state, const ArmArray& m, const GridSource& grid,
                         double t, double dt, double v_dc_source, const ConverterParams& params) {
  PlantStepResult result;
  auto stage = [&](const ConverterState& s, double ts) {
    PlantDerivative d = plant_derivatives(s, m, grid.converter_side(ts), v_dc_source, params);
    result.saturated = result.saturated || d.saturated;
    return d;
  };
  auto advance = [&](const PlantDerivative& d, double h) {
    ConverterState s = state;
    for (int k = 0; k < kArms; ++k) {
      s.i_arm[k] += h * d.di_arm[k];
      s.v_C[k] += h * d.dv_C[k];
    }
    return s;
  };

  const PlantDerivative k1 = stage(state, t);
  const PlantDerivative k2 = stage(advance(k1, 0.5 * dt), t + 0.5 * dt);
  const PlantDerivative k3 = stage(advance(k2, 0.5 * dt), t + 0.5 * dt);
  const PlantDerivative k4 = stage(advance(k3, dt), t + dt);

  ConverterState next = state;
  for (int k = 0; k < kArms; ++k) {
    next.i_arm[k] += dt / 6.0 * (k1.di_arm[k] + 2.0 * k2.di_arm[k] + 2.0 * k3.di_arm[k] + k4.di_arm[k]);
    next.v_C[k] += dt / 6.0 * (k1.dv_C[k] + 2.0 * k2.dv_C[k] + 2.0 * k3.dv_C[k] + k4.dv_C[k]);
    next.v_C[k] = std::max(next.v_C[k], 0.0);
  }
  if (!all_finite(next.i_arm) || !all_finite(next.v_C)) {
    throw PlantFault("plant state became non-finite");
  }
  update_dc_terminal(next, m, grid.converter_side(t + dt), v_dc_source, params);
  result.state = next;
  return result;
}

}  // namespace estatcom
