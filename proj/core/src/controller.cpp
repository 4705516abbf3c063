#include "estatcom/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace estatcom {

namespace {

double pcc_angle(const Abc& v) {
  const double alpha = (2.0 * v[0] - v[1] - v[2]) / 3.0;
  const double beta = (v[1] - v[2]) / std::sqrt(3.0);
  return std::atan2(beta, alpha);
}

Abc ac_currents(const ConverterState& s) { return {ac_current(s, 0), ac_current(s, 1), ac_current(s, 2)}; }

}  // namespace

double effective_reactance(const ConverterParams& params, const ControlDesign& design) {
  const double R = design.R_v_pu * params.Z_base();
  const double X = design.L_v_pu * params.Z_base();
  if (!(X > 0.0)) throw std::invalid_argument("ControlDesign.L_v_pu must be positive");
  return (R * R + X * X) / X;
}

double synchronizing_power(const ConverterParams& params, const ControlDesign& design) {
  const double V = params.V_phase_peak();
  return 1.5 * pmax(V, V, effective_reactance(params, design));
}

ControlGains design_gains(const ConverterParams& params, const ControlDesign& d) {
  params.validate();
  const double V = params.V_phase_peak();
  const double I = params.I_peak_rated();
  const double Z = params.Z_base();
  const double S = params.S_rated;
  const double w_nom = params.omega_nominal();
  if (!(d.W_ref_ramp_pu >= 0.0)) throw std::invalid_argument("ControlDesign.W_ref_ramp_pu must be non-negative");
  const double X_eff = effective_reactance(params, d);
  const double P_max = synchronizing_power(params, d);

  ControlGains g;
  const ApcGains apc = d.apc_bw_hz > 0.0 ? gains_from_bandwidth(d.apc_bw_hz, d.zeta, P_max)
                                         : apc_gains_from_inertia(d.H, S, w_nom, P_max, d.zeta);
  g.K_P = apc.K_P;
  g.K_I = apc.K_I;
  const TecGains tec = tec_gains_from_bandwidth(d.tec_bw_hz, d.tec_mapping);
  g.K_PW = tec.K_PW;
  g.K_IW = tec.K_IW;
  g.P_tec_max = d.P_tec_max_pu * S;

  g.rpc = {0.0, kTwoPi * d.rpc_bw_hz * X_eff / (1.5 * V)};
  g.E_max = d.E_max_pu * V;

  g.cc_bandwidth = kTwoPi * d.cc_bw_hz;
  g.L_eq = params.L_eq();
  g.cc = {g.cc_bandwidth * params.L_eq(), g.cc_bandwidth * params.R_eq()};
  g.va = {d.R_v_pu * Z, d.L_v_pu * Z / w_nom};
  g.I_max = d.I_max_pu * I;

  const double a_circ = kTwoPi * d.circ_bw_hz;
  g.circ = {a_circ * params.L_arm, a_circ * params.R_arm};
  g.v_corr_max = d.v_corr_max_pu * params.V_dc_rated;
  const double w_leg = kTwoPi * d.bal_leg_bw_hz;
  const double w_arm = kTwoPi * d.bal_arm_bw_hz;
  g.bal_leg = {w_leg, 0.25 * w_leg * w_leg};
  g.bal_arm = {w_arm, 0.25 * w_arm * w_arm};
  g.soc = {d.soc_kp_pu * S, d.soc_ki_pu * S};

  g.deadband_width = kTwoPi * d.deadband_hz;
  g.H = d.H;
  g.v_d_min = d.v_d_min_pu * V;
  g.feedforward = d.feedforward;
  return g;
}

Controller::Controller(const ConverterParams& params, const ControlDesign& design,
                       const ControlSetpoints& setpoints, Mode mode, double dt)
    : params_(params),
      design_(design),
      gains_(design_gains(params, design)),
      setpoints_(setpoints),
      dt_(dt),
      omega_nom_(params.omega_nominal()),
      E_nom_(params.V_phase_peak()) {
  if (!(dt > 0.0)) throw std::invalid_argument("Controller: dt must be positive");
  if (!(setpoints.W_ref > 0.0)) throw std::invalid_argument("ControlSetpoints.W_ref must be positive");
  gains_.validate(mode);
  state_.mode = mode;
  state_.apc.omega_conv = omega_nom_;
  state_.E_mag = E_nom_;
  window_len_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / (params.grid.f_nominal * dt))));
}

void Controller::enable_energy_boost(const Abc& v_pcc) {
  if (state_.deblocked) return;
  state_.deblocked = true;
  state_.apc = {};
  state_.apc.theta = pcc_angle(v_pcc);
  state_.apc.omega_conv = omega_nom_;
  state_.i_va = {};
  state_.cc = {};
  state_.v_dc_ctrl = 0.0;
  state_.W_ref_eff = -1.0;  // seeded from the first measurement
}

void Controller::set_mode(Mode mode) {
  gains_.validate(mode);
  state_.mode = mode;
}

void Controller::set_H(double H) {
  if (!(H > 0.0)) throw std::invalid_argument("SetH requires H > 0");
  const bool ff = gains_.feedforward;
  design_.H = H;
  design_.apc_bw_hz = 0.0;
  gains_ = design_gains(params_, design_);
  gains_.feedforward = ff;
}

EnergyErrors Controller::filtered_energy_errors(const ArmArray& v_C) {
  const EnergyErrors e = energy_errors(v_C, params_.C_arm);
  window_.push_back(e);
  for (int x = 0; x < 3; ++x) {
    window_sum_.leg[x] += e.leg[x];
    window_sum_.arm_diff[x] += e.arm_diff[x];
  }
  if (window_.size() > window_len_) {
    const EnergyErrors& old = window_.front();
    for (int x = 0; x < 3; ++x) {
      window_sum_.leg[x] -= old.leg[x];
      window_sum_.arm_diff[x] -= old.arm_diff[x];
    }
    window_.pop_front();
  }
  EnergyErrors avg;
  const double n = static_cast<double>(window_.size());
  for (int x = 0; x < 3; ++x) {
    avg.leg[x] = window_sum_.leg[x] / n;
    avg.arm_diff[x] = window_sum_.arm_diff[x] / n;
  }
  return avg;
}

ControllerOutput Controller::step(const ControllerInput& in) {
  if (in.plant == nullptr) throw std::invalid_argument("Controller::step: missing plant measurement");
  const ConverterState& s = *in.plant;
  ControllerOutput out;
  out.W_total = total_internal_energy(s, params_);

  if (!state_.deblocked) {
    const PccMeasurement meas = measure_pcc(in.v_pcc, ac_currents(s), pcc_angle(in.v_pcc));
    out.P_ac = meas.P_ac;
    out.Q_ac = meas.Q_ac;
    out.omega_conv = state_.apc.omega_conv;
    out.E_mag = state_.E_mag;
    return out;
  }
  out.blocked = false;

  const double theta = state_.apc.theta;
  const PccMeasurement meas = measure_pcc(in.v_pcc, ac_currents(s), theta);
  out.P_ac = meas.P_ac;
  out.Q_ac = meas.Q_ac;

  // Energy and synchronization loops.
  if (state_.W_ref_eff < 0.0 || design_.W_ref_ramp_pu <= 0.0) {
    state_.W_ref_eff = design_.W_ref_ramp_pu > 0.0 ? out.W_total : setpoints_.W_ref;
  }
  if (design_.W_ref_ramp_pu > 0.0) {
    const double step = design_.W_ref_ramp_pu * params_.S_rated * dt_;
    state_.W_ref_eff += std::clamp(setpoints_.W_ref - state_.W_ref_eff, -step, step);
  }
  out.W_ref = state_.W_ref_eff;
  out.P_tec = tec_step(state_.tec, gains_, out.W_total, state_.W_ref_eff, dt_);
  const double P_target = setpoints_.P_ref_ext - out.P_tec;
  state_.apc = apc_step(state_.apc, gains_, omega_nom_, P_target, meas.P_ac, dt_);
  const double omega = state_.apc.omega_conv;
  out.omega_conv = omega;
  out.omega_conv_P = state_.apc.omega_conv_P;
  out.omega_conv_I = state_.apc.omega_conv_I;

  state_.E_mag = rpc_step(state_.rpc, gains_, E_nom_, setpoints_.Q_ref, meas.Q_ac, dt_);
  out.E_mag = state_.E_mag;

  double ff = 0.0;
  if (gains_.feedforward) {
    const FeedforwardResult r =
        feedforward_current(-out.P_tec, meas.v_dq, state_.i_qref_prev, gains_.v_d_min, state_.ff_last);
    ff = r.i_dref_ff;
    out.ff_frozen = r.frozen;
  }
  state_.ff_last = ff;

  const VirtualAdmittanceResult va =
      virtual_admittance_step(state_.i_va, gains_, state_.E_mag, omega, meas.v_dq, ff, dt_);
  out.i_ref = va.i_ref;
  out.current_clamped = va.clamped;
  state_.i_qref_prev = va.i_ref.q;

  // Common-mode voltage: the storage voltage once connected, otherwise a
  // headroom-limited target ramped toward the rated dc voltage.
  const double v_C_min = *std::min_element(s.v_C.begin(), s.v_C.end());
  const double shape = design_.zero_sequence_injection ? std::sqrt(3.0) / 2.0 : 1.0;
  if (s.dc_mc_closed) {
    state_.v_dc_ctrl = s.v_dc;
  } else {
    const double v_mag = std::hypot(meas.v_dq.d, meas.v_dq.q);
    const double target =
        std::clamp(2.0 * (params_.m_max * v_C_min - 1.1 * shape * v_mag), 0.0, params_.V_dc_rated);
    const double step = design_.v_dc_ramp_pu_per_s * params_.V_dc_rated * dt_;
    state_.v_dc_ctrl = target < state_.v_dc_ctrl ? target : std::min(target, state_.v_dc_ctrl + step);
  }
  const double v_max = std::max(0.0, params_.m_max * v_C_min - 0.5 * state_.v_dc_ctrl) / shape;

  const CurrentControlResult cc =
      current_controller_step(state_.cc, gains_, va.i_ref, meas.i_dq, meas.v_dq, omega, dt_, v_max);
  out.voltage_clamped = cc.clamped;

  // Dc-side path: inertial reference plus SOC bias, only with the storage connected.
  const bool storage_on = in.storage_available && s.dc_mc_closed;
  out.P_dc_inertia = inertial_power_reference(out.omega_conv_P, gains_, state_.mode, storage_on);
  if (state_.mode == Mode::EStatcom && storage_on) {
    out.P_soc = soc_regulation_step(state_.soc, gains_.soc, in.soc, setpoints_.soc_ref, dt_,
                                    std::numeric_limits<double>::infinity());
  }
  out.P_dc_ref = out.P_dc_inertia + out.P_soc;
  const double i_dc_ref = s.dc_mc_closed && s.v_dc > 0.0 ? in.storage_P_dc / s.v_dc : 0.0;

  const double theta_mod = theta + 0.5 * omega * dt_;
  BalancingInputs bal;
  bal.errors = filtered_energy_errors(s.v_C);
  bal.i_arm = s.i_arm;
  bal.emf = inverse_park({cc.v_out_ref.d, cc.v_out_ref.q, 0.0}, theta_mod);
  bal.E_peak = std::hypot(cc.v_out_ref.d, cc.v_out_ref.q);
  bal.i_dc_ref = i_dc_ref;
  bal.v_dc = std::max(state_.v_dc_ctrl, 0.5 * params_.V_dc_rated);
  bal.balancing_enabled = state_.balancing;
  const BalancingResult br = balancing_and_circulating_step(state_.bal, gains_, bal, dt_);

  const ModulationResult mod =
      modulation(cc.v_out_ref, br.v_corr, theta_mod, s.v_C, state_.v_dc_ctrl, params_.m_max,
                 0.05 * params_.v_arm_rated(), design_.zero_sequence_injection);
  out.m = mod.m;
  out.modulation_saturated = mod.saturated;
  return out;
}

}  // namespace estatcom
