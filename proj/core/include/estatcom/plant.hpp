#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "estatcom/frame.hpp"

namespace estatcom {

/// Arm ordering used throughout: a-upper, a-lower, b-upper, b-lower, c-upper, c-lower.
inline constexpr int kArms = 6;
inline constexpr int upper(int phase) { return 2 * phase; }
inline constexpr int lower(int phase) { return 2 * phase + 1; }

using ArmArray = std::array<double, kArms>;

/// Raised for non-finite plant inputs or states; the engine turns it into a trip.
class PlantFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridParams {
  double V_ll_rms = 0.0;    // grid-side line-to-line rms (V)
  double f_nominal = 60.0;  // Hz
  double L_grid = 0.0;      // series inductance referred to the converter side (H)
  double R_grid = 0.0;      // series resistance referred to the converter side (Ohm)
  double turns_ratio = 1.0; // grid-side : converter-side voltage ratio
};

struct ConverterParams {
  double R_arm = 0.0;
  double L_arm = 0.0;
  double C_arm = 0.0;  // equivalent arm capacitance = C_sm / N_sm
  int N_sm = 0;
  double V_sm_rated = 0.0;
  double V_dc_rated = 0.0;
  double R_precharge = 0.0;
  GridParams grid;
  double S_rated = 0.0;
  double m_max = 1.0;
  /// Current scale of the smoothed diode characteristic of a blocked arm.
  double blocked_current_scale = 0.0;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  double C_sm() const { return C_arm * N_sm; }
  double v_arm_rated() const { return N_sm * V_sm_rated; }
  double W_rated() const { return 3.0 * C_arm * v_arm_rated() * v_arm_rated(); }
  double omega_nominal() const { return kTwoPi * grid.f_nominal; }
  /// Converter-side phase peak voltage at nominal magnitude.
  double V_phase_peak() const;
  /// Converter-side phase peak current at rated apparent power.
  double I_peak_rated() const { return S_rated / (1.5 * V_phase_peak()); }
  double Z_base() const { return V_phase_peak() / I_peak_rated(); }
  double L_eq() const { return 0.5 * L_arm + grid.L_grid; }
  double R_eq() const { return 0.5 * R_arm + grid.R_grid; }
};

struct ConverterState {
  ArmArray i_arm{};  // A
  ArmArray v_C{};    // V, sum of submodule voltages of each arm
  double v_dc = 0.0;
  double i_dc = 0.0;
  bool precharge_bypassed = false;
  bool dc_mc_closed = false;
  bool blocked = true;
};

/// Differential (ac) and common-mode (circulating) decomposition of a leg.
inline double ac_current(const ConverterState& s, int phase) {
  return s.i_arm[upper(phase)] - s.i_arm[lower(phase)];
}
inline double circulating_current(const ConverterState& s, int phase) {
  return 0.5 * (s.i_arm[upper(phase)] + s.i_arm[lower(phase)]);
}
inline void set_leg_currents(ConverterState& s, int phase, double i_ac, double i_circ) {
  s.i_arm[upper(phase)] = i_circ + 0.5 * i_ac;
  s.i_arm[lower(phase)] = i_circ - 0.5 * i_ac;
}

double total_internal_energy(const ConverterState& state, const ConverterParams& params);
double arm_energy(double v_C, const ConverterParams& params);

struct PlantDerivative {
  ArmArray di_arm{};
  ArmArray dv_C{};
  /// Inserted arm voltages actually applied (after modulation clamp).
  ArmArray v_arm{};
  /// Ac node voltage of each leg relative to the dc midpoint.
  Abc v_node{};
  /// Dc terminal voltage: the stiff source when the MC is closed, the floating
  /// common-mode equilibrium otherwise.
  double v_dc = 0.0;
  bool saturated = false;
};

/// Arm-averaged DS-MC dynamics. `v_grid` are converter-side grid source voltages,
/// `v_dc_source` the storage voltage used when the dc MC is closed.
PlantDerivative plant_derivatives(const ConverterState& state, const ArmArray& m, const Abc& v_grid,
                                  double v_dc_source, const ConverterParams& params);

/// Commanded grid conditions; frequency changes are phase continuous.
struct GridCommand {
  double f_g = 60.0;
  double V_mag = 1.0;     // pu of nominal
  double ramp_rate = 0.0; // Hz/s; 0 means an instantaneous frequency step
};

/// Thevenin source behind the grid impedance. Holds the command history and
/// evaluates the instantaneous three-phase voltage analytically.
class GridSource {
 public:
  explicit GridSource(const GridParams& params, GridCommand initial = {});

  /// Commands a new frequency from time `t`; ramps at cmd.ramp_rate.
  void command(double t, const GridCommand& cmd);

  double phase(double t) const;
  double frequency(double t) const;
  double magnitude_pu(double t) const;
  /// Grid-side instantaneous phase voltages.
  Abc voltages(double t) const;
  /// Voltages referred to the converter side of the transformer.
  Abc converter_side(double t) const;
  double V_phase_peak_grid() const;

 private:
  struct Segment {
    double t0 = 0.0;
    double theta0 = 0.0;
    double f_start = 0.0;
    double f_end = 0.0;
    double ramp_duration = 0.0;
    double V_mag = 1.0;
  };
  const Segment& segment_at(double t) const;
  double phase_in(const Segment& seg, double t) const;
  double frequency_in(const Segment& seg, double t) const;

  GridParams params_;
  std::vector<Segment> segments_;
};

/// Same as GridSource::voltages for a single-command history.
Abc grid_voltage(double t, const GridSource& source);

struct StorageParams {
  double E_rated = 0.0;   // J at soc = 1
  double P_limit = 0.0;   // W
  double tau = 2e-3;      // s
  double soc_min = 0.05;
  double soc_max = 0.95;
  double soc_initial = 0.5;
};

struct StorageState {
  double E_sc = 0.0;
  double soc = 0.0;
  double P_dc = 0.0;  // W, positive = discharging into the dc link
  double P_limit = 0.0;
  bool available = true;
};

StorageState make_storage(const StorageParams& params);

struct StorageStepResult {
  StorageState state;
  bool became_unavailable = false;
};

/// Advances the ideal power-controlled storage by dt. The lag is integrated
/// exactly; `connected` is false while the dc MC is open.
StorageStepResult storage_step(const StorageState& st, double P_dc_ref, double v_dc, double dt,
                               const StorageParams& params, bool connected);

/// One classic fourth-order Runge-Kutta step of the plant with zero-order-hold
/// modulation. Grid voltages are evaluated at the stage times.
struct PlantStepResult {
  ConverterState state;
  bool saturated = false;
};
PlantStepResult rk4_step(const ConverterState& state, const ArmArray& m, const GridSource& grid,
                         double t, double dt, double v_dc_source, const ConverterParams& params);

/// Fills the derived fields v_dc and i_dc of a state after integration.
void update_dc_terminal(ConverterState& state, const ArmArray& m, const Abc& v_grid,
                        double v_dc_source, const ConverterParams& params);

}  // namespace estatcom
