#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "estatcom/analysis.hpp"
#include "estatcom/frame.hpp"

namespace estatcom {

namespace {

constexpr double kRadToDeg = 180.0 / kPi;
constexpr double kStabilityTolerance = 1e-8;
constexpr int kPointsPerDecade = 200;
constexpr int kBisections = 80;

double mag_db(const TransferFunction& tf, double f) { return 20.0 * std::log10(std::abs(tf.at_hz(f))); }

// Angle wrapped into (-180, 180].
double wrap_deg(double a) {
  double r = std::remainder(a, 360.0);
  if (r <= -180.0) r += 360.0;
  return r;
}

template <typename F>
double bisect_log(F&& g, double lo, double hi) {
  double g_lo = g(lo);
  for (int i = 0; i < kBisections; ++i) {
    const double mid = std::sqrt(lo * hi);
    const double g_mid = g(mid);
    if ((g_mid >= 0.0) == (g_lo >= 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

}  // namespace

double unwrapped_phase_deg(const TransferFunction& tf, double f_hz) {
  const Complex s(0.0, kTwoPi * f_hz);
  const double direct = std::arg(tf(s)) * kRadToDeg;
  double factor = 0.0;
  if (tf.num().front() / tf.den().front() < 0.0) factor -= 180.0;
  for (const Complex& z : tf.zeros()) factor += std::arg(s - z) * kRadToDeg;
  for (const Complex& p : tf.poles()) factor -= std::arg(s - p) * kRadToDeg;
  return direct + 360.0 * std::round((factor - direct) / 360.0);
}

MarginReport margins(const TransferFunction& loop, double f_min_hz, double f_max_hz) {
  if (!loop.proper()) throw std::invalid_argument("margins: loop gain must be proper");
  if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz)) throw std::invalid_argument("margins: bad frequency range");

  MarginReport report;
  const int n = static_cast<int>(std::ceil(std::log10(f_max_hz / f_min_hz) * kPointsPerDecade)) + 1;
  std::vector<double> f(n), m(n), ph(n);
  for (int i = 0; i < n; ++i) {
    f[i] = f_min_hz * std::pow(f_max_hz / f_min_hz, static_cast<double>(i) / (n - 1));
    m[i] = mag_db(loop, f[i]);
    ph[i] = unwrapped_phase_deg(loop, f[i]);
  }

  for (int i = 0; i + 1 < n; ++i) {
    if (!std::isfinite(m[i]) || !std::isfinite(m[i + 1])) continue;
    if ((m[i] >= 0.0) != (m[i + 1] >= 0.0)) {
      const double fc = bisect_log([&](double x) { return mag_db(loop, x); }, f[i], f[i + 1]);
      report.gain_crossovers_hz.push_back(fc);
      report.phase_margins_deg.push_back(wrap_deg(180.0 + unwrapped_phase_deg(loop, fc)));
    }
    // Phase crossovers at odd multiples of 180 degrees.
    const double k0 = std::floor((ph[i] + 180.0) / 360.0);
    const double k1 = std::floor((ph[i + 1] + 180.0) / 360.0);
    if (std::isfinite(ph[i]) && std::isfinite(ph[i + 1]) && k0 != k1) {
      const double level = 360.0 * std::max(k0, k1) - 180.0;
      report.phase_crossovers_hz.push_back(
          bisect_log([&](double x) { return unwrapped_phase_deg(loop, x) - level; }, f[i], f[i + 1]));
    }
  }

  if (!report.gain_crossovers_hz.empty()) {
    report.has_crossover = true;
    report.phase_margin_deg = report.phase_margins_deg.front();
  } else {
    // Unity dc gain: the crossover sits at zero frequency.
    const double dc = loop.dc_gain();
    if (std::isfinite(dc) && std::abs(std::abs(dc) - 1.0) < 1e-12) {
      report.has_crossover = true;
      report.gain_crossovers_hz.push_back(0.0);
      report.phase_margin_deg = wrap_deg(180.0 + (dc < 0.0 ? 180.0 : 0.0));
      report.phase_margins_deg.push_back(report.phase_margin_deg);
    }
  }
  report.gain_margin_db = report.phase_crossovers_hz.empty()
                              ? std::numeric_limits<double>::infinity()
                              : -mag_db(loop, report.phase_crossovers_hz.front());

  report.closed_loop_poles = poly::roots(poly::add(loop.den(), loop.num()));
  report.stable = std::all_of(report.closed_loop_poles.begin(), report.closed_loop_poles.end(),
                              [](const Complex& p) { return p.real() < -kStabilityTolerance; });
  return report;
}

std::string format_margin_report(const MarginReport& r) {
  std::string out;
  if (r.has_crossover) {
    out += fmt::format("phase_margin_deg: {:.4f}\n", r.phase_margin_deg);
  } else {
    out += "phase_margin_deg: no crossover\n";
  }
  out += fmt::format("gain_margin_db: {:.4f}\n", r.gain_margin_db);
  out += "gain_crossovers_hz:";
  for (double f : r.gain_crossovers_hz) out += fmt::format(" {:.6g}", f);
  out += "\nphase_crossovers_hz:";
  for (double f : r.phase_crossovers_hz) out += fmt::format(" {:.6g}", f);
  out += fmt::format("\nstable: {}\n", r.stable ? "true" : "false");
  out += "closed_loop_poles:";
  for (const Complex& p : r.closed_loop_poles) out += fmt::format(" ({:.6g}{:+.6g}j)", p.real(), p.imag());
  out += "\n";
  return out;
}

std::vector<double> log_frequency_grid(double f_min_hz, double f_max_hz, int points) {
  if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz) || points < 2) {
    throw std::invalid_argument("log_frequency_grid: need 0 < f_min < f_max and at least 2 points");
  }
  std::vector<double> f(points);
  for (int i = 0; i < points; ++i) {
    f[i] = f_min_hz * std::pow(f_max_hz / f_min_hz, static_cast<double>(i) / (points - 1));
  }
  return f;
}

FrequencyResponse bode(const TransferFunction& tf, const std::vector<double>& freq_hz) {
  FrequencyResponse r;
  r.freq_hz = freq_hz;
  for (double f : freq_hz) {
    if (!(f > 0.0)) throw std::invalid_argument("bode: frequencies must be positive");
    const Complex g = tf.at_hz(f);
    const bool pole = !std::isfinite(g.real()) || !std::isfinite(g.imag());
    r.at_pole.push_back(pole);
    if (pole) {
      r.mag_db.push_back(std::numeric_limits<double>::infinity());
      r.phase_deg.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      r.mag_db.push_back(20.0 * std::log10(std::abs(g)));
      r.phase_deg.push_back(unwrapped_phase_deg(tf, f));
    }
  }
  return r;
}

void write_bode_csv(std::ostream& os, const FrequencyResponse& r) {
  os << "freq_hz,mag_db,phase_deg\n";
  for (std::size_t i = 0; i < r.freq_hz.size(); ++i) {
    os << fmt::format("{:.10g},{:.10g},{:.10g}\n", r.freq_hz[i], r.mag_db[i], r.phase_deg[i]);
  }
}

}  // namespace estatcom
