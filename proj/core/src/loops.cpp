#include <cmath>
#include <stdexcept>
#include <string>

#include "estatcom/analysis.hpp"
#include "estatcom/frame.hpp"

namespace estatcom {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

TransferFunction make_apc_closed_loop(double zeta, double omega_n) {
  require_positive(zeta, "zeta");
  require_positive(omega_n, "omega_n");
  return {{2.0 * zeta * omega_n, omega_n * omega_n}, {1.0, 2.0 * zeta * omega_n, omega_n * omega_n}};
}

TransferFunction make_loop_gain(double K_PW, double K_IW, const TransferFunction& apc_cl) {
  if (K_PW < 0.0 || K_IW < 0.0 || (K_PW == 0.0 && K_IW == 0.0)) {
    throw std::invalid_argument("make_loop_gain: gains must be non-negative and not both zero");
  }
  const TransferFunction pi{{K_PW, K_IW}, {1.0, 0.0}};
  const TransferFunction integrator{{1.0}, {1.0, 0.0}};
  return pi * apc_cl * integrator;
}

TransferFunction make_apc_with_feedforward(const TransferFunction& apc_cl, double cc_bw) {
  require_positive(cc_bw, "cc_bw");
  // apc_cl = a / (a + b): a is the APC open-loop numerator, b its denominator.
  const Poly& a = apc_cl.num();
  const Poly b = poly::sub(apc_cl.den(), a);
  const Poly s_plus = {1.0, cc_bw};
  const Poly num = poly::mul(poly::add(b, a), s_plus);
  const Poly den = poly::add(poly::scale(b, cc_bw), poly::mul(a, s_plus));
  return {num, den};
}

TransferFunction make_tec_closed_loop(double K_PW, double K_IW, const TransferFunction& apc_cl, bool with_ff,
                                      double cc_bw) {
  const TransferFunction path = with_ff ? make_apc_with_feedforward(apc_cl, cc_bw) : apc_cl;
  return make_loop_gain(K_PW, K_IW, path).feedback();
}

TransferFunction make_inertial_tf(double P_max, double K_P, double K_I) {
  require_positive(P_max, "P_max");
  require_positive(K_P, "K_P");
  require_positive(K_I, "K_I");
  return {{-P_max, 0.0}, {1.0, K_P * P_max, K_I * P_max}};
}

TransferFunction make_convfreq_tf(double P_max, double K_P, double K_I) {
  require_positive(P_max, "P_max");
  require_positive(K_P, "K_P");
  require_positive(K_I, "K_I");
  return {{-K_P * P_max, -K_I * P_max}, {1.0, K_P * P_max, K_I * P_max}};
}

TransferFunction make_convfreq_p_tf(double P_max, double K_P, double K_I) {
  require_positive(P_max, "P_max");
  require_positive(K_P, "K_P");
  require_positive(K_I, "K_I");
  return {{-K_P * P_max, 0.0}, {1.0, K_P * P_max, K_I * P_max}};
}

double pmax(double E, double V, double X) {
  require_positive(E, "E");
  require_positive(V, "V");
  require_positive(X, "X");
  return E * V / X;
}

ApcGains gains_from_bandwidth(double bw_hz, double zeta, double P_max) {
  require_positive(bw_hz, "apc bandwidth");
  require_positive(zeta, "zeta");
  require_positive(P_max, "P_max");
  const double wn = kTwoPi * bw_hz;
  return {2.0 * zeta * wn / P_max, wn * wn / P_max};
}

TecGains tec_gains_from_bandwidth(double bw_hz, const TecMapping& mapping) {
  require_positive(bw_hz, "tec bandwidth");
  require_positive(mapping.scale, "tec mapping scale");
  require_positive(mapping.ratio, "tec mapping ratio");
  const double w = kTwoPi * bw_hz;
  const double K_PW = mapping.scale * w;
  return {K_PW, K_PW * w / mapping.ratio};
}

ApcGains apc_gains_from_inertia(double H, double S_rated, double omega_nom, double P_max, double zeta) {
  require_positive(H, "H");
  require_positive(S_rated, "S_rated");
  require_positive(omega_nom, "omega_nom");
  require_positive(P_max, "P_max");
  require_positive(zeta, "zeta");
  const double K_I = omega_nom / (2.0 * H * S_rated);
  return {2.0 * zeta * std::sqrt(K_I * P_max) / P_max, K_I};
}

void LoopCase::validate() const {
  require_positive(apc_bw, "apc_bw");
  require_positive(tec_bw, "tec_bw");
  require_positive(zeta, "zeta");
  require_positive(E, "E");
  require_positive(V, "V");
  require_positive(X, "X");
}

LoopSet build_loops(const LoopCase& c, const TecMapping& mapping) {
  c.validate();
  const ApcGains apc = gains_from_bandwidth(c.apc_bw, c.zeta, c.P_max());
  const TecGains tec = tec_gains_from_bandwidth(c.tec_bw, mapping);
  const double wn = std::sqrt(apc.K_I * c.P_max());
  const double zeta = apc.K_P * c.P_max() / (2.0 * wn);
  TransferFunction apc_cl = make_apc_closed_loop(zeta, wn);
  TransferFunction loop = make_loop_gain(tec.K_PW, tec.K_IW, apc_cl);
  return {apc, tec, apc_cl, loop};
}

std::vector<double> lsim(const TransferFunction& tf, const std::vector<double>& u, double dt) {
  if (!tf.proper()) throw std::invalid_argument("lsim: transfer function must be proper");
  require_positive(dt, "dt");
  const int n = tf.den_degree();
  const double lead = tf.den().front();
  std::vector<double> a(n + 1), b(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) a[i] = tf.den()[i] / lead;
  const int offset = n - tf.num_degree();
  for (int i = 0; i <= tf.num_degree(); ++i) b[offset + i] = tf.num()[i] / lead;

  // Controllable canonical form: x_n' = u - sum a_{n+1-i} x_i, y = sum c x + D u.
  const double D = b[0];
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) c[i] = b[n - i] - a[n - i] * D;

  std::vector<double> y(u.size(), 0.0);
  if (n == 0) {
    for (std::size_t k = 0; k < u.size(); ++k) y[k] = D * u[k];
    return y;
  }
  std::vector<double> x(n, 0.0), k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto deriv = [&](const std::vector<double>& s, double uin, std::vector<double>& out) {
    for (int i = 0; i + 1 < n; ++i) out[i] = s[i + 1];
    double acc = uin;
    for (int i = 0; i < n; ++i) acc -= a[n - i] * s[i];
    out[n - 1] = acc;
  };
  auto output = [&](const std::vector<double>& s, double uin) {
    double acc = D * uin;
    for (int i = 0; i < n; ++i) acc += c[i] * s[i];
    return acc;
  };
  for (std::size_t k = 0; k < u.size(); ++k) {
    y[k] = output(x, u[k]);
    if (k + 1 == u.size()) break;
    const double u0 = u[k];
    const double u1 = u[k + 1];
    const double um = 0.5 * (u0 + u1);
    deriv(x, u0, k1);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    deriv(tmp, um, k2);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    deriv(tmp, um, k3);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    deriv(tmp, u1, k4);
    for (int i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return y;
}

}  // namespace estatcom
