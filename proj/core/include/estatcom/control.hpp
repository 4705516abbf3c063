#pragma once

#include <array>

#include "estatcom/frame.hpp"
#include "estatcom/plant.hpp"

namespace estatcom {

enum class Mode { Statcom, EStatcom };

struct PiGains {
  double kp = 0.0;
  double ki = 0.0;
};

struct PiState {
  double integral = 0.0;
  bool clamped = false;
};

/// Forward-Euler PI with output clamp [lo, hi]. The output uses the integrator
/// value before this step's update; the integrator freezes while the output is
/// clamped in the direction of the error and is itself kept within [lo, hi].
double pi_step(PiState& state, const PiGains& gains, double error, double dt, double lo, double hi);

struct VirtualAdmittance {
  double R_v = 0.0;  // Ohm
  double L_v = 0.0;  // H
};

struct ControlGains {
  // Active power controller: omega_conv = omega_nom + K_P e + integral(K_I e).
  double K_P = 0.0;  // rad/s per W
  double K_I = 0.0;  // rad/s^2 per W
  // Total-energy controller.
  double K_PW = 0.0;  // W per J
  double K_IW = 0.0;  // W per J s
  double P_tec_max = 0.0;
  // Reactive power controller (adds to the nominal internal-voltage magnitude).
  PiGains rpc;
  double E_max = 0.0;
  // Inner loops.
  double cc_bandwidth = 0.0;  // rad/s
  PiGains cc;
  double L_eq = 0.0;
  VirtualAdmittance va;
  double I_max = 0.0;
  PiGains circ;
  double v_corr_max = 0.0;
  PiGains bal_leg;  // W per J
  PiGains bal_arm;  // W per J
  PiGains soc;      // W per unit soc
  double deadband_width = 0.0;  // rad/s
  double H = 0.0;               // s
  double v_d_min = 0.0;         // V
  bool feedforward = true;

  /// Throws std::invalid_argument; K_P = 0 is rejected in E-STATCOM mode.
  void validate(Mode mode) const;
};

struct ControlSetpoints {
  double W_ref = 0.0;
  double Q_ref = 0.0;
  double soc_ref = 0.5;
  double P_ref_ext = 0.0;
};

struct PccMeasurement {
  Dq v_dq;
  Dq i_dq;
  double P_ac = 0.0;
  double Q_ac = 0.0;
};

/// P_ac = 1.5 (v_d i_d + v_q i_q).
double compute_pac(const Dq& v, const Dq& i);
/// Q_ac = 1.5 (v_q i_d - v_d i_q); positive = capacitive injection.
double compute_qac(const Dq& v, const Dq& i);
PccMeasurement measure_pcc(const Abc& v_abc, const Abc& i_abc, double theta);

struct FeedforwardResult {
  double i_dref_ff = 0.0;
  bool frozen = false;
};

/// i_dref_ff = P_ref / (1.5 v_d) - (v_q / v_d) i_qref. Below |v_d| < v_d_min the
/// previous value is held and `frozen` is raised.
FeedforwardResult feedforward_current(double P_ref, const Dq& v, double i_qref, double v_d_min,
                                      double last_value = 0.0);

/// Total-energy PI. Returns the power to absorb from the ac side (W).
double tec_step(PiState& state, const ControlGains& gains, double W_total, double W_ref, double dt);

struct ApcState {
  double theta = 0.0;
  double omega_conv = 0.0;
  double omega_conv_P = 0.0;
  double omega_conv_I = 0.0;
};

/// e = P_target - P_ac. Advances the integral branch and the converter angle.
/// The returned angle is the one to use for the next step.
ApcState apc_step(const ApcState& state, const ControlGains& gains, double omega_nom, double P_target,
                  double P_ac, double dt);

/// Continuous deadband: zero inside |x| < width, shifted toward zero outside.
double deadband(double x, double width);

/// Dc-side inertial power (W, positive = storage discharging). Zero in STATCOM
/// mode or when the storage is unavailable.
double inertial_power_reference(double omega_conv_P, const ControlGains& gains, Mode mode,
                                bool storage_available);

/// Slow SOC regulation bias (W, positive = discharging), zero with zero gains.
double soc_regulation_step(PiState& state, const PiGains& gains, double soc, double soc_ref, double dt,
                           double P_limit);

/// Internal-voltage magnitude, E_nom plus PI on (Q_ref - Q_ac), clamped to [0, E_max].
double rpc_step(PiState& state, const ControlGains& gains, double E_nom, double Q_ref, double Q_ac,
                double dt);

struct VirtualAdmittanceResult {
  Dq i_ref;
  bool clamped = false;
};

/// Dq-frame virtual R-L driven by (E_mag, 0) - v_dq, integrated exactly over dt.
/// `i_va` holds the admittance current between calls. The feedforward term is
/// added on the d axis and has priority when the I_max clamp is active.
VirtualAdmittanceResult virtual_admittance_step(Dq& i_va, const ControlGains& gains, double E_mag,
                                                double omega, const Dq& v, double i_dref_ff, double dt);

struct CurrentControlResult {
  Dq v_out_ref;
  bool clamped = false;
};

/// Synchronous-frame PI with +/- omega L_eq decoupling and PCC voltage feedforward.
CurrentControlResult current_controller_step(std::array<PiState, 2>& state, const ControlGains& gains,
                                             const Dq& i_ref, const Dq& i, const Dq& v, double omega,
                                             double dt, double v_max);

struct BalancingState {
  std::array<PiState, 3> leg{};
  std::array<PiState, 3> arm{};
  std::array<PiState, 3> circ{};
};

struct EnergyErrors {
  Abc leg{};       // W_xu + W_xl - W_total / 3
  Abc arm_diff{};  // W_xu - W_xl
};
EnergyErrors energy_errors(const ArmArray& v_C, double C_arm);

struct BalancingInputs {
  EnergyErrors errors;  // usually averaged over one fundamental period
  ArmArray i_arm{};
  Abc emf{};            // per-phase converter emf reference (V)
  double E_peak = 0.0;  // amplitude of emf
  double i_dc_ref = 0.0;
  double v_dc = 0.0;    // dc-link voltage used to convert power to current
  bool balancing_enabled = true;
};

struct BalancingResult {
  Abc v_corr{};           // common-mode voltage correction per leg (V)
  Abc i_circ_ref{};       // circulating-current references (A)
  bool clamped = false;
};

/// Leg-energy and upper/lower arm-energy balancing feeding a circulating-current PI.
BalancingResult balancing_and_circulating_step(BalancingState& state, const ControlGains& gains,
                                               const BalancingInputs& in, double dt);

struct ModulationResult {
  ArmArray m{};
  bool saturated = false;
};

/// Direct modulation by the measured arm capacitor voltages:
/// m_xu = (v_com,x - v_out,x) / v_Cxu, m_xl = (v_com,x + v_out,x) / v_Cxl with
/// v_com,x = v_dc / 2 + v_corr,x. With `zero_sequence_injection` the min-max
/// common-mode offset is added to the phase references.
/// Throws std::runtime_error when any v_C is below v_C_min.
ModulationResult modulation(const Dq& v_out_ref, const Abc& v_corr, double theta, const ArmArray& v_C,
                            double v_dc, double m_max, double v_C_min,
                            bool zero_sequence_injection = false);

}  // namespace estatcom
