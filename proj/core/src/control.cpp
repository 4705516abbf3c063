#include "estatcom/control.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace estatcom {

namespace {

void require_non_negative(double value, const char* name) {
  if (!(value >= 0.0)) {
    throw std::invalid_argument(std::string("ControlGains.") + name + " must be non-negative");
  }
}

}  // namespace

void ControlGains::validate(Mode mode) const {
  require_non_negative(K_P, "K_P");
  require_non_negative(K_I, "K_I");
  require_non_negative(K_PW, "K_PW");
  require_non_negative(K_IW, "K_IW");
  require_non_negative(P_tec_max, "P_tec_max");
  require_non_negative(rpc.kp, "rpc.kp");
  require_non_negative(rpc.ki, "rpc.ki");
  require_non_negative(cc.kp, "cc.kp");
  require_non_negative(cc.ki, "cc.ki");
  require_non_negative(circ.kp, "circ.kp");
  require_non_negative(circ.ki, "circ.ki");
  require_non_negative(bal_leg.kp, "bal_leg.kp");
  require_non_negative(bal_leg.ki, "bal_leg.ki");
  require_non_negative(bal_arm.kp, "bal_arm.kp");
  require_non_negative(bal_arm.ki, "bal_arm.ki");
  require_non_negative(soc.kp, "soc.kp");
  require_non_negative(soc.ki, "soc.ki");
  require_non_negative(deadband_width, "deadband_width");
  require_non_negative(v_d_min, "v_d_min");
  if (!(va.L_v > 0.0) || !(va.R_v >= 0.0)) {
    throw std::invalid_argument("ControlGains.va requires L_v > 0 and R_v >= 0");
  }
  if (!(I_max > 0.0)) throw std::invalid_argument("ControlGains.I_max must be positive");
  if (mode == Mode::EStatcom) {
    if (!(K_P > 0.0)) {
      throw std::invalid_argument("ControlGains.K_P must be positive in E-STATCOM mode");
    }
    if (!(H > 0.0)) throw std::invalid_argument("ControlGains.H must be positive in E-STATCOM mode");
  }
}

double pi_step(PiState& state, const PiGains& gains, double error, double dt, double lo, double hi) {
  const double unclamped = gains.kp * error + state.integral;
  const double out = std::clamp(unclamped, lo, hi);
  state.clamped = unclamped > hi || unclamped < lo;
  const bool pushing_out = (unclamped > hi && error > 0.0) || (unclamped < lo && error < 0.0);
  if (!pushing_out) {
    state.integral = std::clamp(state.integral + gains.ki * error * dt, lo, hi);
  }
  return out;
}

double compute_pac(const Dq& v, const Dq& i) { return 1.5 * (v.d * i.d + v.q * i.q); }

double compute_qac(const Dq& v, const Dq& i) { return 1.5 * (v.q * i.d - v.d * i.q); }

PccMeasurement measure_pcc(const Abc& v_abc, const Abc& i_abc, double theta) {
  PccMeasurement m;
  m.v_dq = park(v_abc, theta);
  m.i_dq = park(i_abc, theta);
  m.P_ac = compute_pac(m.v_dq, m.i_dq);
  m.Q_ac = compute_qac(m.v_dq, m.i_dq);
  return m;
}

FeedforwardResult feedforward_current(double P_ref, const Dq& v, double i_qref, double v_d_min,
                                      double last_value) {
  if (std::abs(v.d) < v_d_min || v.d == 0.0) return {last_value, true};
  return {P_ref / (1.5 * v.d) - (v.q / v.d) * i_qref, false};
}

double tec_step(PiState& state, const ControlGains& gains, double W_total, double W_ref, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("tec_step requires dt > 0");
  return pi_step(state, {gains.K_PW, gains.K_IW}, W_ref - W_total, dt, -gains.P_tec_max,
                 gains.P_tec_max);
}

ApcState apc_step(const ApcState& state, const ControlGains& gains, double omega_nom, double P_target,
                  double P_ac, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("apc_step requires dt > 0");
  const double error = P_target - P_ac;
  ApcState next;
  next.omega_conv_P = gains.K_P * error;
  next.omega_conv_I = state.omega_conv_I + gains.K_I * error * dt;
  next.omega_conv = omega_nom + (next.omega_conv_P + next.omega_conv_I);
  next.theta = wrap_angle(state.theta + next.omega_conv * dt);
  return next;
}

double deadband(double x, double width) {
  if (std::abs(x) <= width) return 0.0;
  return x > 0.0 ? x - width : x + width;
}

double inertial_power_reference(double omega_conv_P, const ControlGains& gains, Mode mode,
                                bool storage_available) {
  if (mode != Mode::EStatcom || !storage_available) return 0.0;
  if (!(gains.K_P > 0.0)) {
    throw std::invalid_argument("inertial power mapping requires K_P > 0 in E-STATCOM mode");
  }
  // omega_conv_P = K_P (P_target - P_ac): a negative value means the ac side is
  // delivering inertial power the storage has to supply.
  return -deadband(omega_conv_P, gains.deadband_width) / gains.K_P;
}

double soc_regulation_step(PiState& state, const PiGains& gains, double soc, double soc_ref, double dt,
                           double P_limit) {
  if (!(dt > 0.0)) throw std::invalid_argument("soc_regulation_step requires dt > 0");
  return pi_step(state, gains, soc - soc_ref, dt, -P_limit, P_limit);
}

double rpc_step(PiState& state, const ControlGains& gains, double E_nom, double Q_ref, double Q_ac,
                double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rpc_step requires dt > 0");
  const double delta = pi_step(state, gains.rpc, Q_ref - Q_ac, dt, -E_nom, gains.E_max - E_nom);
  return std::clamp(E_nom + delta, 0.0, gains.E_max);
}

VirtualAdmittanceResult virtual_admittance_step(Dq& i_va, const ControlGains& gains, double E_mag,
                                                double omega, const Dq& v, double i_dref_ff,
                                                double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("virtual_admittance_step requires dt > 0");
  using C = std::complex<double>;
  const double L = gains.va.L_v;
  const C a(gains.va.R_v / L, omega);
  const C drive(E_mag - v.d, -v.q);
  const C decay = std::exp(-a * dt);
  const C state(i_va.d, i_va.q);
  const C next = decay * state + (1.0 - decay) / (a * L) * drive;
  i_va.d = next.real();
  i_va.q = next.imag();

  VirtualAdmittanceResult out;
  out.i_ref.d = i_va.d + i_dref_ff;
  out.i_ref.q = i_va.q;
  const double I_max = gains.I_max;
  if (std::hypot(out.i_ref.d, out.i_ref.q) > I_max) {
    out.clamped = true;
    const double ff = std::clamp(i_dref_ff, -I_max, I_max);
    const double a2 = i_va.d * i_va.d + i_va.q * i_va.q;
    double scale = 0.0;
    if (a2 > 0.0) {
      const double b = 2.0 * ff * i_va.d;
      const double c = ff * ff - I_max * I_max;
      scale = (-b + std::sqrt(std::max(b * b - 4.0 * a2 * c, 0.0))) / (2.0 * a2);
      scale = std::clamp(scale, 0.0, 1.0);
    }
    out.i_ref.d = ff + scale * i_va.d;
    out.i_ref.q = scale * i_va.q;
  }
  return out;
}

CurrentControlResult current_controller_step(std::array<PiState, 2>& state, const ControlGains& gains,
                                             const Dq& i_ref, const Dq& i, const Dq& v, double omega,
                                             double dt, double v_max) {
  if (!(dt > 0.0)) throw std::invalid_argument("current_controller_step requires dt > 0");
  const double e_d = i_ref.d - i.d;
  const double e_q = i_ref.q - i.q;
  const double u_d = gains.cc.kp * e_d + state[0].integral;
  const double u_q = gains.cc.kp * e_q + state[1].integral;
  CurrentControlResult out;
  out.v_out_ref.d = v.d + u_d - omega * gains.L_eq * i.q;
  out.v_out_ref.q = v.q + u_q + omega * gains.L_eq * i.d;
  const double magnitude = std::hypot(out.v_out_ref.d, out.v_out_ref.q);
  if (magnitude > v_max) {
    const double scale = v_max > 0.0 ? v_max / magnitude : 0.0;
    out.v_out_ref.d *= scale;
    out.v_out_ref.q *= scale;
    out.clamped = true;
  } else {
    state[0].integral += gains.cc.ki * e_d * dt;
    state[1].integral += gains.cc.ki * e_q * dt;
  }
  state[0].clamped = state[1].clamped = out.clamped;
  return out;
}

EnergyErrors energy_errors(const ArmArray& v_C, double C_arm) {
  EnergyErrors e;
  double W_total = 0.0;
  for (int x = 0; x < 3; ++x) {
    const double W_u = 0.5 * C_arm * v_C[upper(x)] * v_C[upper(x)];
    const double W_l = 0.5 * C_arm * v_C[lower(x)] * v_C[lower(x)];
    e.leg[x] = W_u + W_l;
    e.arm_diff[x] = W_u - W_l;
    W_total += W_u + W_l;
  }
  for (double& w : e.leg) w -= W_total / 3.0;
  return e;
}

BalancingResult balancing_and_circulating_step(BalancingState& state, const ControlGains& gains,
                                               const BalancingInputs& in, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("balancing_and_circulating_step requires dt > 0");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Abc i_leg{}, i_arm{};
  if (in.balancing_enabled) {
    const double v_dc = std::max(in.v_dc, 1e-9);
    const double E2 = std::max(in.E_peak * in.E_peak, 1e-9);
    for (int x = 0; x < 3; ++x) {
      const double P_leg = pi_step(state.leg[x], gains.bal_leg, in.errors.leg[x], dt, -kInf, kInf);
      i_leg[x] = -P_leg / v_dc;
      const double k = pi_step(state.arm[x], gains.bal_arm, in.errors.arm_diff[x], dt, -kInf, kInf);
      i_arm[x] = k * in.emf[x] / E2;
    }
    const double mean_leg = (i_leg[0] + i_leg[1] + i_leg[2]) / 3.0;
    const double mean_arm = (i_arm[0] + i_arm[1] + i_arm[2]) / 3.0;
    for (int x = 0; x < 3; ++x) {
      i_leg[x] -= mean_leg;
      i_arm[x] -= mean_arm;
    }
  }

  BalancingResult out;
  for (int x = 0; x < 3; ++x) {
    out.i_circ_ref[x] = in.i_dc_ref / 3.0 + i_leg[x] + i_arm[x];
    const double i_c = 0.5 * (in.i_arm[upper(x)] + in.i_arm[lower(x)]);
    const double u = pi_step(state.circ[x], gains.circ, out.i_circ_ref[x] - i_c, dt, -gains.v_corr_max,
                             gains.v_corr_max);
    out.clamped = out.clamped || state.circ[x].clamped;
    // Raising the leg's common-mode voltage lowers its circulating current.
    out.v_corr[x] = -u;
  }
  return out;
}

ModulationResult modulation(const Dq& v_out_ref, const Abc& v_corr, double theta, const ArmArray& v_C,
                            double v_dc, double m_max, double v_C_min, bool zero_sequence_injection) {
  for (double v : v_C) {
    if (v < v_C_min) {
      throw std::runtime_error("arm capacitor voltage below modulation floor; converter not charged");
    }
  }
  Abc v_out = inverse_park({v_out_ref.d, v_out_ref.q, 0.0}, theta);
  if (zero_sequence_injection) {
    const auto [lo, hi] = std::minmax({v_out[0], v_out[1], v_out[2]});
    const double offset = -0.5 * (lo + hi);
    for (double& v : v_out) v += offset;
  }
  ModulationResult out;
  for (int x = 0; x < 3; ++x) {
    const double v_com = 0.5 * v_dc + v_corr[x];
    double m_u = (v_com - v_out[x]) / v_C[upper(x)];
    double m_l = (v_com + v_out[x]) / v_C[lower(x)];
    if (std::abs(m_u) > m_max || std::abs(m_l) > m_max) out.saturated = true;
    out.m[upper(x)] = std::clamp(m_u, -m_max, m_max);
    out.m[lower(x)] = std::clamp(m_l, -m_max, m_max);
  }
  return out;
}

}  // namespace estatcom
