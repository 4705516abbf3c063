#include <cmath>
#include <stdexcept>

#include "estatcom/plant.hpp"

namespace estatcom {

GridSource::GridSource(const GridParams& params, GridCommand initial) : params_(params) {
  if (!(initial.f_g > 0.0) || initial.V_mag < 0.0) {
    throw std::invalid_argument("GridCommand requires f_g > 0 and V_mag >= 0");
  }
  Segment seg;
  seg.f_start = initial.f_g;
  seg.f_end = initial.f_g;
  seg.V_mag = initial.V_mag;
  segments_.push_back(seg);
}

void GridSource::command(double t, const GridCommand& cmd) {
  if (!(cmd.f_g > 0.0) || cmd.V_mag < 0.0) {
    throw std::invalid_argument("GridCommand requires f_g > 0 and V_mag >= 0");
  }
  if (t < segments_.back().t0) {
    throw std::invalid_argument("GridSource commands must be issued in time order");
  }
  Segment seg;
  seg.t0 = t;
  seg.theta0 = phase(t);
  seg.f_start = frequency(t);
  seg.f_end = cmd.f_g;
  seg.ramp_duration = cmd.ramp_rate > 0.0 ? std::abs(seg.f_end - seg.f_start) / cmd.ramp_rate : 0.0;
  seg.V_mag = cmd.V_mag;
  segments_.push_back(seg);
}

const GridSource::Segment& GridSource::segment_at(double t) const {
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (it->t0 <= t) return *it;
  }
  return segments_.front();
}

double GridSource::phase_in(const Segment& seg, double t) const {
  const double tau = t - seg.t0;
  const double T = seg.ramp_duration;
  if (T <= 0.0) return seg.theta0 + kTwoPi * seg.f_end * tau;
  const double slope = (seg.f_end - seg.f_start) / T;
  if (tau <= T) return seg.theta0 + kTwoPi * (seg.f_start * tau + 0.5 * slope * tau * tau);
  return seg.theta0 + kTwoPi * (0.5 * (seg.f_start + seg.f_end) * T + seg.f_end * (tau - T));
}

double GridSource::frequency_in(const Segment& seg, double t) const {
  const double tau = t - seg.t0;
  const double T = seg.ramp_duration;
  if (T <= 0.0 || tau >= T) return seg.f_end;
  return seg.f_start + (seg.f_end - seg.f_start) * tau / T;
}

double GridSource::phase(double t) const { return phase_in(segment_at(t), t); }
double GridSource::frequency(double t) const { return frequency_in(segment_at(t), t); }
double GridSource::magnitude_pu(double t) const { return segment_at(t).V_mag; }

double GridSource::V_phase_peak_grid() const {
  return std::sqrt(2.0) * params_.V_ll_rms / std::sqrt(3.0);
}

Abc GridSource::voltages(double t) const {
  const Segment& seg = segment_at(t);
  return balanced_set(seg.V_mag * V_phase_peak_grid(), phase_in(seg, t));
}

Abc GridSource::converter_side(double t) const {
  Abc v = voltages(t);
  for (double& x : v) x /= params_.turns_ratio;
  return v;
}

Abc grid_voltage(double t, const GridSource& source) { return source.voltages(t); }

}  // namespace estatcom
