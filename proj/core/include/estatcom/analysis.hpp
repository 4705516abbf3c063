#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace estatcom {

using Poly = std::vector<double>;  // descending powers of s
using Complex = std::complex<double>;

namespace poly {
Poly trim(Poly p);
Poly add(const Poly& a, const Poly& b);
Poly sub(const Poly& a, const Poly& b);
Poly mul(const Poly& a, const Poly& b);
Poly scale(const Poly& a, double k);
Complex eval(const Poly& p, Complex s);
/// Roots via eigenvalues of the balanced companion matrix. Trailing zero
/// coefficients are returned as exact roots at the origin.
std::vector<Complex> roots(const Poly& p);
}  // namespace poly

/// Rational function num(s)/den(s). No pole-zero cancellation is performed, so
/// arithmetic is exact on the coefficient lists.
class TransferFunction {
 public:
  TransferFunction(Poly num, Poly den);
  static TransferFunction constant(double k);
  static TransferFunction s();

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  int num_degree() const { return static_cast<int>(num_.size()) - 1; }
  int den_degree() const { return static_cast<int>(den_.size()) - 1; }
  bool proper() const { return num_degree() <= den_degree(); }

  Complex operator()(Complex s) const;
  Complex at_hz(double f) const;
  double dc_gain() const;

  std::vector<Complex> poles() const { return poly::roots(den_); }
  std::vector<Complex> zeros() const { return poly::roots(num_); }

  /// G / (1 + G H) for negative feedback.
  TransferFunction feedback(const TransferFunction& h = constant(1.0)) const;

  friend TransferFunction operator+(const TransferFunction& a, const TransferFunction& b);
  friend TransferFunction operator-(const TransferFunction& a, const TransferFunction& b);
  friend TransferFunction operator*(const TransferFunction& a, const TransferFunction& b);
  friend TransferFunction operator/(const TransferFunction& a, const TransferFunction& b);
  TransferFunction operator-() const;

 private:
  Poly num_;
  Poly den_;
};

struct MarginReport {
  bool has_crossover = false;
  double phase_margin_deg = 0.0;       // at the lowest gain crossover
  double gain_margin_db = 0.0;         // at the lowest phase crossover; +inf when none
  std::vector<double> gain_crossovers_hz;
  std::vector<double> phase_crossovers_hz;
  std::vector<double> phase_margins_deg;  // one per gain crossover
  bool stable = false;
  std::vector<Complex> closed_loop_poles;
};

/// Gain/phase margins of a loop gain and closed-loop stability from the roots
/// of den + num. Crossovers are searched on [f_min, f_max] Hz.
MarginReport margins(const TransferFunction& loop, double f_min_hz = 1e-5, double f_max_hz = 1e6);
std::string format_margin_report(const MarginReport& report);

/// Unwrapped phase in degrees: direct evaluation with the branch chosen by the
/// pole/zero factor sum, so the phase is continuous along the jw axis.
double unwrapped_phase_deg(const TransferFunction& tf, double f_hz);

struct FrequencyResponse {
  std::vector<double> freq_hz;
  std::vector<double> mag_db;
  std::vector<double> phase_deg;
  std::vector<bool> at_pole;
};

std::vector<double> log_frequency_grid(double f_min_hz = 0.01, double f_max_hz = 1000.0, int points = 400);
FrequencyResponse bode(const TransferFunction& tf, const std::vector<double>& freq_hz);
void write_bode_csv(std::ostream& os, const FrequencyResponse& response);

// Loop construction.

/// (2 zeta wn s + wn^2) / (s^2 + 2 zeta wn s + wn^2).
TransferFunction make_apc_closed_loop(double zeta, double omega_n);
/// (K_PW + K_IW / s) * apc_cl / s.
TransferFunction make_loop_gain(double K_PW, double K_IW, const TransferFunction& apc_cl);
/// Energy closed loop W / W_ref. With feedforward the APC block is replaced by
/// (b + a)(s + cc_bw) / (cc_bw b + a (s + cc_bw)) where apc_cl = a / (a + b).
TransferFunction make_tec_closed_loop(double K_PW, double K_IW, const TransferFunction& apc_cl, bool with_ff,
                                      double cc_bw);
/// Effective active-power path seen by the TEC when the feedforward is active.
TransferFunction make_apc_with_feedforward(const TransferFunction& apc_cl, double cc_bw);
/// P_ac / w_g = -P_max s / (s^2 + K_P P_max s + K_I P_max).
TransferFunction make_inertial_tf(double P_max, double K_P, double K_I);
/// (-K_P P_max s - K_I P_max) / (s^2 + K_P P_max s + K_I P_max).
TransferFunction make_convfreq_tf(double P_max, double K_P, double K_I);
/// -K_P P_max s / (s^2 + K_P P_max s + K_I P_max).
TransferFunction make_convfreq_p_tf(double P_max, double K_P, double K_I);

// Gain mappings.

struct ApcGains {
  double K_P = 0.0;
  double K_I = 0.0;
};
struct TecGains {
  double K_PW = 0.0;
  double K_IW = 0.0;
};

/// Proportional scale and P/I ratio of the TEC bandwidth mapping.
struct TecMapping {
  double scale = 1.6;
  double ratio = 3.6;
};

double pmax(double E, double V, double X);
/// wn = 2 pi bw, K_P = 2 zeta wn / P_max, K_I = wn^2 / P_max.
ApcGains gains_from_bandwidth(double bw_hz, double zeta, double P_max);
/// K_PW = scale 2 pi bw, K_IW = K_PW 2 pi bw / ratio.
TecGains tec_gains_from_bandwidth(double bw_hz, const TecMapping& mapping = {});
/// K_I = omega_nom / (2 H S_rated), K_P = 2 zeta sqrt(K_I P_max) / P_max.
ApcGains apc_gains_from_inertia(double H, double S_rated, double omega_nom, double P_max, double zeta = 0.707);

struct LoopCase {
  double apc_bw = 3.0;   // Hz
  double tec_bw = 0.3;   // Hz
  double zeta = 0.707;
  double E = 1.0;
  double V = 1.0;
  double X = 0.3;
  double P_max() const { return pmax(E, V, X); }
  void validate() const;
};

struct LoopSet {
  ApcGains apc;
  TecGains tec;
  TransferFunction apc_cl;
  TransferFunction loop_gain;
};
LoopSet build_loops(const LoopCase& c, const TecMapping& mapping = {});

// Linear time-domain simulation.

/// Response of a proper transfer function to samples u[k] = u(k dt), zero
/// initial state, input linearly interpolated between samples (RK4).
std::vector<double> lsim(const TransferFunction& tf, const std::vector<double>& u, double dt);

}  // namespace estatcom
