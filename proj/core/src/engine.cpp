#include "estatcom/engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace estatcom {

namespace {

constexpr double kBoostComplete = 0.98;  // share of W_ref that ends the energy boost

constexpr const char* kArmNames[kArms] = {"au", "al", "bu", "bl", "cu", "cl"};

struct ChannelIds {
  std::size_t P_ac, Q_ac, P_dc, P_dc_ref, P_dc_meas, P_tec, W_total, W_ref, W_arm, f_conv, f_conv_P, f_conv_I,
      f_grid, i_abc, v_C, v_dc, soc, E_mag, flag_saturation, flag_clamp, flag_trip, blocked;
};

ChannelIds make_channels(WaveformLog& log) {
  ChannelIds id{};
  std::size_t n = 0;
  auto add = [&](const std::string& name, const std::string& unit) {
    log.add_channel(name, unit);
    return n++;
  };
  id.P_ac = add("P_ac", "W");
  id.Q_ac = add("Q_ac", "var");
  id.P_dc = add("P_dc", "W");
  id.P_dc_ref = add("P_dc_ref", "W");
  id.P_dc_meas = add("P_dc_meas", "W");
  id.P_tec = add("P_tec", "W");
  id.W_total = add("W_total", "J");
  id.W_ref = add("W_ref", "J");
  id.W_arm = n;
  for (const char* arm : kArmNames) add(std::string("W_") + arm, "J");
  id.f_conv = add("f_conv", "Hz");
  id.f_conv_P = add("f_conv_P", "Hz");
  id.f_conv_I = add("f_conv_I", "Hz");
  id.f_grid = add("f_grid", "Hz");
  id.i_abc = n;
  for (const char* ph : {"i_a", "i_b", "i_c"}) add(ph, "A");
  id.v_C = n;
  for (const char* arm : kArmNames) add(std::string("v_C_") + arm, "V");
  id.v_dc = add("v_dc", "V");
  id.soc = add("soc", "1");
  id.E_mag = add("E_mag", "V");
  id.flag_saturation = add("flag_saturation", "1");
  id.flag_clamp = add("flag_clamp", "1");
  id.flag_trip = add("flag_trip", "1");
  id.blocked = add("blocked", "1");
  return id;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::BypassPrecharge: return "BypassPrecharge";
    case EventKind::EnableEnergyBoost: return "EnableEnergyBoost";
    case EventKind::EnableBalancing: return "EnableBalancing";
    case EventKind::CloseDcMC: return "CloseDcMC";
    case EventKind::SetGridFrequency: return "SetGridFrequency";
    case EventKind::SetQRef: return "SetQRef";
    case EventKind::SetMode: return "SetMode";
    case EventKind::SetH: return "SetH";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& name) {
  for (EventKind k : {EventKind::BypassPrecharge, EventKind::EnableEnergyBoost, EventKind::EnableBalancing,
                      EventKind::CloseDcMC, EventKind::SetGridFrequency, EventKind::SetQRef, EventKind::SetMode,
                      EventKind::SetH}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown event kind '" + name + "'");
}

std::string to_string(Mode mode) { return mode == Mode::Statcom ? "STATCOM" : "E-STATCOM"; }

Mode mode_from_string(const std::string& name) {
  if (name == "STATCOM") return Mode::Statcom;
  if (name == "E-STATCOM") return Mode::EStatcom;
  throw std::invalid_argument("unknown mode '" + name + "' (expected STATCOM or E-STATCOM)");
}

void ScenarioConfig::validate() const {
  params.validate();
  require(dt_plant > 0.0, "solver.dt_plant_s must be positive");
  require(dt_control > 0.0, "solver.dt_control_s must be positive");
  const double ratio = dt_control / dt_plant;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio && std::round(ratio) >= 1.0,
          "solver.dt_control_s must be an integer multiple of solver.dt_plant_s");
  require(t_end > 0.0, "solver.t_end_s must be positive");
  require(setpoints.W_ref > 0.0, "setpoints.W_ref_J must be positive");
  require(grid_V_mag_pu >= 0.0, "grid.V_mag_pu must be non-negative");
  require(frequency_ramp_s >= 0.0, "solver.frequency_ramp_s must be non-negative");
  require(log.decimation >= 1, "log.decimation must be at least 1");
  require(storage.E_rated > 0.0, "storage.E_rated_J must be positive");
  require(storage.P_limit >= 0.0, "storage.P_limit_W must be non-negative");
  require(storage.tau > 0.0, "storage.tau_s must be positive");
  require(storage.soc_min >= 0.0 && storage.soc_min < storage.soc_max && storage.soc_max <= 1.0,
          "storage soc limits must satisfy 0 <= soc_min < soc_max <= 1");
  require(trips.overcurrent_pu > 0.0, "trips.overcurrent_pu must be positive");
  require(trips.v_C_collapse_pu >= 0.0, "trips.v_C_collapse_pu must be non-negative");
  require(trips.v_C_over_pu > trips.v_C_collapse_pu, "trips.v_C_over_pu must exceed trips.v_C_collapse_pu");
  double last = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    require(e.t >= 0.0 && e.t <= t_end, fmt::format("events[{}].t_s must lie within [0, t_end]", i));
    require(e.t >= last, fmt::format("events[{}] is out of order; events must be sorted by time", i));
    for (std::size_t j = 0; j < i; ++j) {
      require(!(events[j].t == e.t && events[j].kind == e.kind),
              fmt::format("events[{}] repeats kind {} at the same timestamp", i, to_string(e.kind)));
    }
    if (e.kind == EventKind::SetGridFrequency) {
      require(e.value > 0.0, fmt::format("events[{}].f_Hz must be positive", i));
      require(!e.ramp_rate || *e.ramp_rate >= 0.0, fmt::format("events[{}].ramp_rate_Hz_per_s must be >= 0", i));
    }
    if (e.kind == EventKind::SetH) require(e.value > 0.0, fmt::format("events[{}].H_s must be positive", i));
    last = e.t;
  }
  design_gains(params, design).validate(mode);
}

void WaveformLog::add_channel(const std::string& name, const std::string& unit) {
  if (has(name)) throw std::invalid_argument("duplicate channel " + name);
  channels_.push_back({name, unit, {}});
}

bool WaveformLog::has(const std::string& name) const {
  return std::any_of(channels_.begin(), channels_.end(), [&](const Channel& c) { return c.name == name; });
}

const std::vector<double>& WaveformLog::channel(const std::string& name) const {
  for (const Channel& c : channels_) {
    if (c.name == name) return c.data;
  }
  throw std::invalid_argument("no channel named '" + name + "'");
}

void WaveformLog::select(const std::vector<std::string>& keep) {
  std::vector<Channel> out;
  for (const std::string& name : keep) {
    auto it = std::find_if(channels_.begin(), channels_.end(), [&](const Channel& c) { return c.name == name; });
    if (it == channels_.end()) throw std::invalid_argument("log.channels: unknown channel '" + name + "'");
    out.push_back(*it);
  }
  channels_ = std::move(out);
}

void WaveformLog::write_csv(std::ostream& os) const {
  os << "t";
  for (const Channel& c : channels_) os << ',' << c.name;
  os << '\n';
  fmt::memory_buffer buf;
  for (std::size_t k = 0; k < t_.size(); ++k) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{:.10g}", t_[k]);
    for (const Channel& c : channels_) fmt::format_to(std::back_inserter(buf), ",{:.10g}", c.data[k]);
    buf.push_back('\n');
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

RunResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const ConverterParams& p = cfg.params;
  RunResult result;
  result.W_ref = cfg.setpoints.W_ref;
  WaveformLog& log = result.log;
  const ChannelIds id = make_channels(log);

  GridSource grid(p.grid, GridCommand{p.grid.f_nominal, cfg.grid_V_mag_pu, 0.0});
  ConverterState state;
  StorageState storage = make_storage(cfg.storage);
  Controller controller(p, cfg.design, cfg.setpoints, cfg.mode, cfg.dt_control);

  const int substeps = static_cast<int>(std::lround(cfg.dt_control / cfg.dt_plant));
  const long steps = std::lround(cfg.t_end / cfg.dt_control);
  const double I_trip = cfg.trips.overcurrent_pu * p.I_peak_rated();
  const double v_C_trip = cfg.trips.v_C_collapse_pu * p.v_arm_rated();
  const double v_C_over = cfg.trips.v_C_over_pu * p.v_arm_rated();
  const double W_arm = cfg.trips.arm_energy_fraction * cfg.setpoints.W_ref;
  bool collapse_armed = false;
  std::size_t next_event = 0;
  ControllerOutput out;

  auto trip = [&](double t, const std::string& reason) {
    result.status = ExitStatus::Trip;
    result.trip_time = t;
    result.trip_reason = reason;
  };

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_control;
    const Abc v_pcc = grid.converter_side(t);

    while (next_event < cfg.events.size() && cfg.events[next_event].t <= t + 1e-9) {
      const Event& e = cfg.events[next_event++];
      switch (e.kind) {
        case EventKind::BypassPrecharge: state.precharge_bypassed = true; break;
        case EventKind::EnableEnergyBoost: controller.enable_energy_boost(v_pcc); break;
        case EventKind::EnableBalancing: controller.enable_balancing(); break;
        case EventKind::CloseDcMC:
          state.dc_mc_closed = true;
          update_dc_terminal(state, out.m, v_pcc, p.V_dc_rated, p);
          break;
        case EventKind::SetGridFrequency: {
          GridCommand cmd;
          cmd.f_g = e.value;
          cmd.V_mag = grid.magnitude_pu(t);
          const double df = std::abs(e.value - grid.frequency(t));
          if (e.ramp_rate) {
            cmd.ramp_rate = *e.ramp_rate;
          } else {
            cmd.ramp_rate = cfg.frequency_ramp_s > 0.0 ? df / cfg.frequency_ramp_s : 0.0;
          }
          grid.command(t, cmd);
          break;
        }
        case EventKind::SetQRef: controller.set_q_ref(e.value); break;
        case EventKind::SetMode: controller.set_mode(e.mode); break;
        case EventKind::SetH: controller.set_H(e.value); break;
      }
      result.messages.push_back(fmt::format("t={:.6g} s: {}", t, to_string(e.kind)));
    }

    ControllerInput in;
    in.plant = &state;
    in.v_pcc = v_pcc;
    in.storage_P_dc = storage.P_dc;
    in.soc = storage.soc;
    in.storage_available = storage.available;
    bool control_fault = false;
    try {
      out = controller.step(in);
    } catch (const std::runtime_error& ex) {
      trip(t, ex.what());
      control_fault = true;
    }
    state.blocked = out.blocked;

    if (!control_fault) {
      const StorageStepResult sr =
          storage_step(storage, out.P_dc_ref, state.v_dc, cfg.dt_control, cfg.storage, state.dc_mc_closed);
      storage = sr.state;
      if (sr.became_unavailable) {
        result.messages.push_back(fmt::format("t={:.6g} s: storage left its SOC range and is unavailable", t));
      }
    }

    if (!collapse_armed && !out.blocked && out.W_total >= W_arm) collapse_armed = true;
    if (result.boost_complete_time < 0.0 && !out.blocked && out.W_total >= kBoostComplete * cfg.setpoints.W_ref) {
      result.boost_complete_time = t;
    }
    if (out.modulation_saturated) ++result.saturation_samples;
    if (out.current_clamped || out.voltage_clamped) ++result.clamp_samples;

    if (result.status != ExitStatus::Trip) {
      for (int x = 0; x < 3; ++x) {
        if (std::abs(ac_current(state, x)) > I_trip) {
          trip(t, fmt::format("overcurrent in phase {} ({:.4g} A > {:.4g} A)", "abc"[x], ac_current(state, x), I_trip));
          break;
        }
      }
    }
    if (result.status != ExitStatus::Trip) {
      for (int a = 0; a < kArms; ++a) {
        if (state.v_C[a] > v_C_over) {
          trip(t, fmt::format("arm overvoltage in arm {} ({:.4g} V > {:.4g} V)", kArmNames[a], state.v_C[a], v_C_over));
          break;
        }
      }
    }
    if (result.status != ExitStatus::Trip && collapse_armed) {
      for (int a = 0; a < kArms; ++a) {
        if (state.v_C[a] < v_C_trip) {
          trip(t, fmt::format("arm voltage collapse in arm {} ({:.4g} V < {:.4g} V)", kArmNames[a], state.v_C[a],
                              v_C_trip));
          break;
        }
      }
    }

    const bool tripped = result.status == ExitStatus::Trip;
    if (k % cfg.log.decimation == 0 || tripped || k == steps) {
      log.append_time(t);
      log.append(id.P_ac, out.P_ac);
      log.append(id.Q_ac, out.Q_ac);
      log.append(id.P_dc, storage.P_dc);
      log.append(id.P_dc_ref, out.P_dc_ref);
      double i_c_sum = 0.0;
      for (int x = 0; x < 3; ++x) i_c_sum += circulating_current(state, x);
      log.append(id.P_dc_meas, state.dc_mc_closed ? state.v_dc * i_c_sum : 0.0);
      log.append(id.P_tec, out.P_tec);
      log.append(id.W_total, out.W_total);
      log.append(id.W_ref, cfg.setpoints.W_ref);
      for (int a = 0; a < kArms; ++a) log.append(id.W_arm + a, arm_energy(state.v_C[a], p));
      log.append(id.f_conv, out.omega_conv / kTwoPi);
      log.append(id.f_conv_P, out.omega_conv_P / kTwoPi);
      log.append(id.f_conv_I, out.omega_conv_I / kTwoPi);
      log.append(id.f_grid, grid.frequency(t));
      for (int x = 0; x < 3; ++x) log.append(id.i_abc + x, ac_current(state, x));
      for (int a = 0; a < kArms; ++a) log.append(id.v_C + a, state.v_C[a]);
      log.append(id.v_dc, state.v_dc);
      log.append(id.soc, storage.soc);
      log.append(id.E_mag, out.E_mag);
      log.append(id.flag_saturation, out.modulation_saturated ? 1.0 : 0.0);
      log.append(id.flag_clamp, (out.current_clamped || out.voltage_clamped) ? 1.0 : 0.0);
      log.append(id.flag_trip, tripped ? 1.0 : 0.0);
      log.append(id.blocked, out.blocked ? 1.0 : 0.0);
    }
    if (tripped || k == steps) break;

    for (int j = 0; j < substeps; ++j) {
      const double ts = t + j * cfg.dt_plant;
      try {
        state = rk4_step(state, out.m, grid, ts, cfg.dt_plant, p.V_dc_rated, p).state;
      } catch (const PlantFault& ex) {
        trip(ts, ex.what());
        break;
      }
    }
    if (result.status == ExitStatus::Trip) {
      // Record the faulted instant so the log ends at the trip.
      log.append_time(result.trip_time);
      for (std::size_t c = 0; c < log.channels().size(); ++c) {
        log.append(c, c == id.flag_trip ? 1.0 : log.channels()[c].data.back());
      }
      break;
    }
  }

  const double t_last = log.t().empty() ? 0.0 : log.t().back();
  for (const BandCheckSpec& spec : cfg.checks) {
    const double center = spec.center != 0.0 ? spec.center : cfg.setpoints.W_ref;
    double t1 = spec.t_start;
    if (t1 < 0.0) t1 = result.boost_complete_time;
    const double t2 = spec.t_end < 0.0 ? t_last : std::min(spec.t_end, t_last);
    if (t1 < 0.0 || t2 <= t1) {
      BandResult br;
      br.channel = spec.channel;
      br.center = center;
      br.pct = spec.pct;
      br.pass = false;
      result.bands.push_back(br);
      continue;
    }
    result.bands.push_back(band_check(log, spec.channel, center, spec.pct, t1, t2));
  }

  if (!cfg.log.channels.empty()) log.select(cfg.log.channels);
  return result;
}

double inertial_energy(const WaveformLog& log, double t1, double t2, const std::string& channel) {
  const std::vector<double>& t = log.t();
  if (!(t2 > t1)) throw std::invalid_argument("inertial_energy: empty window");
  if (t.size() < 2 || t1 < t.front() || t2 > t.back()) {
    throw std::invalid_argument("inertial_energy: window outside the log span");
  }
  const std::vector<double>& p = log.channel(channel);
  auto value_at = [&](double tq) {
    auto it = std::upper_bound(t.begin(), t.end(), tq);
    if (it == t.end()) return p.back();
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    if (i == 0) return p.front();
    const double w = (tq - t[i - 1]) / (t[i] - t[i - 1]);
    return p[i - 1] + w * (p[i] - p[i - 1]);
  };
  double energy = 0.0;
  double t_prev = t1;
  double p_prev = value_at(t1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= t1) continue;
    if (t[i] >= t2) break;
    energy += 0.5 * (p_prev + p[i]) * (t[i] - t_prev);
    t_prev = t[i];
    p_prev = p[i];
  }
  energy += 0.5 * (p_prev + value_at(t2)) * (t2 - t_prev);
  return energy;
}

BandResult band_check(const WaveformLog& log, const std::string& channel, double center, double pct, double t1,
                      double t2) {
  const std::vector<double>& x = log.channel(channel);
  const std::vector<double>& t = log.t();
  BandResult r;
  r.channel = channel;
  r.center = center;
  r.pct = pct;
  r.t_start = t1;
  r.t_end = t2;
  r.pass = true;
  double lo = center * (1.0 - pct);
  double hi = center * (1.0 + pct);
  if (lo > hi) std::swap(lo, hi);
  const double scale = center != 0.0 ? std::abs(center) : 1.0;
  bool any = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t1 || t[i] > t2) continue;
    any = true;
    const double excursion = std::abs(x[i] - center) / scale;
    if (excursion > r.worst_excursion) {
      r.worst_excursion = excursion;
      r.t_worst = t[i];
    }
    if (!(x[i] >= lo && x[i] <= hi)) r.pass = false;
  }
  if (!any) r.pass = false;
  return r;
}

void write_summary(std::ostream& os, const ScenarioConfig& cfg, const RunResult& r) {
  os << fmt::format("scenario: {}\n", cfg.name);
  os << fmt::format("preset: {}\n", cfg.preset);
  os << fmt::format("mode: {}\n", to_string(cfg.mode));
  os << fmt::format("status: {}\n", r.status == ExitStatus::Trip ? "Trip" : "Completed");
  if (r.status == ExitStatus::Trip) {
    os << fmt::format("trip_time_s: {:.6f}\n", r.trip_time);
    os << fmt::format("trip_reason: {}\n", r.trip_reason);
  }
  os << fmt::format("t_end_s: {:.6g}\n", r.log.t().empty() ? 0.0 : r.log.t().back());
  os << fmt::format("W_ref_J: {:.6g}\n", r.W_ref);
  if (r.boost_complete_time >= 0.0) {
    os << fmt::format("boost_complete_s: {:.6f}\n", r.boost_complete_time);
  } else {
    os << "boost_complete_s: never\n";
  }
  os << fmt::format("saturation_samples: {}\n", r.saturation_samples);
  os << fmt::format("clamp_samples: {}\n", r.clamp_samples);
  for (const BandResult& b : r.bands) {
    os << fmt::format("band_check {} center={:.6g} pct={:.4g} window=[{:.6g}, {:.6g}] s: {} (worst {:.4f}% at {:.6g} s)\n",
                      b.channel, b.center, b.pct, b.t_start, b.t_end, b.pass ? "pass" : "fail",
                      100.0 * b.worst_excursion, b.t_worst);
  }
  os << "channels:";
  for (const Channel& c : r.log.channels()) os << fmt::format(" {}[{}]", c.name, c.unit);
  os << "\nevents:\n";
  for (const std::string& m : r.messages) os << "  " << m << '\n';
}

}  // namespace estatcom
