#pragma once

#include <deque>

#include "estatcom/analysis.hpp"
#include "estatcom/control.hpp"
#include "estatcom/plant.hpp"

namespace estatcom {

/// Design-level knobs from which ControlGains are derived. Per-unit values are
/// on the converter-side base (V_phase_peak, I_peak_rated, S_rated).
struct ControlDesign {
  double apc_bw_hz = 0.0;  // > 0 selects the bandwidth mapping, otherwise H is used
  double H = 10.0;         // s
  double zeta = 0.707;
  double tec_bw_hz = 0.3;
  TecMapping tec_mapping;
  double P_tec_max_pu = 2.0;  // above what the current limiter can deliver
  double rpc_bw_hz = 5.0;
  double E_max_pu = 1.4;
  double cc_bw_hz = 200.0;
  double R_v_pu = 0.1;
  double L_v_pu = 0.2;
  double I_max_pu = 1.2;
  double circ_bw_hz = 100.0;
  double v_corr_max_pu = 0.2;  // of V_dc_rated
  double bal_leg_bw_hz = 2.0;
  double bal_arm_bw_hz = 2.0;
  double soc_kp_pu = 0.0;  // W per unit soc, in S_rated
  double soc_ki_pu = 0.0;
  double deadband_hz = 0.002;
  double v_d_min_pu = 0.1;
  bool feedforward = true;
  bool zero_sequence_injection = true;
  double v_dc_ramp_pu_per_s = 5.0;  // MC-open common-mode target slew
  double W_ref_ramp_pu = 0.2;       // energy reference slew, W/s in S_rated; 0 disables
};

/// Virtual impedance seen by the synchronizing loop: X_eff = (R^2 + X^2) / X.
double effective_reactance(const ConverterParams& params, const ControlDesign& design);
/// Linearized synchronizing power 1.5 E V / X_eff at nominal voltage (W/rad).
double synchronizing_power(const ConverterParams& params, const ControlDesign& design);
ControlGains design_gains(const ConverterParams& params, const ControlDesign& design);

struct ControlState {
  Mode mode = Mode::EStatcom;
  ApcState apc;
  PiState tec;
  PiState rpc;
  PiState soc;
  std::array<PiState, 2> cc{};
  BalancingState bal;
  Dq i_va;
  double ff_last = 0.0;
  double i_qref_prev = 0.0;
  double v_dc_ctrl = 0.0;
  double E_mag = 0.0;
  double W_ref_eff = 0.0;  // rate-limited energy reference
  bool deblocked = false;
  bool balancing = false;
};

struct ControllerInput {
  const ConverterState* plant = nullptr;
  Abc v_pcc{};  // converter-side PCC voltages
  double storage_P_dc = 0.0;
  double soc = 0.5;
  bool storage_available = false;
};

struct ControllerOutput {
  ArmArray m{};
  bool blocked = true;
  double P_dc_ref = 0.0;
  // Diagnostics.
  double P_ac = 0.0;
  double Q_ac = 0.0;
  double W_total = 0.0;
  double W_ref = 0.0;
  double P_tec = 0.0;  // power the energy loop asks to absorb
  double P_dc_inertia = 0.0;
  double P_soc = 0.0;
  double omega_conv = 0.0;
  double omega_conv_P = 0.0;
  double omega_conv_I = 0.0;
  double E_mag = 0.0;
  Dq i_ref;
  bool modulation_saturated = false;
  bool current_clamped = false;
  bool voltage_clamped = false;
  bool ff_frozen = false;
};

/// Full control stack executed once per control period.
class Controller {
 public:
  Controller(const ConverterParams& params, const ControlDesign& design, const ControlSetpoints& setpoints,
             Mode mode, double dt);

  /// Deblocks the converter, synchronizing the angle to the measured PCC voltage.
  void enable_energy_boost(const Abc& v_pcc);
  void enable_balancing() { state_.balancing = true; }
  void set_mode(Mode mode);
  void set_H(double H);
  void set_q_ref(double Q_ref) { setpoints_.Q_ref = Q_ref; }
  void set_feedforward(bool on) { gains_.feedforward = on; }

  ControllerOutput step(const ControllerInput& in);

  const ControlState& state() const { return state_; }
  const ControlGains& gains() const { return gains_; }
  const ControlSetpoints& setpoints() const { return setpoints_; }
  const ControlDesign& design() const { return design_; }

 private:
  EnergyErrors filtered_energy_errors(const ArmArray& v_C);

  ConverterParams params_;
  ControlDesign design_;
  ControlGains gains_;
  ControlSetpoints setpoints_;
  ControlState state_;
  double dt_;
  double omega_nom_;
  double E_nom_;
  // One-period moving average of the balancing energy errors.
  std::deque<EnergyErrors> window_;
  EnergyErrors window_sum_;
  std::size_t window_len_;
};

}  // namespace estatcom
