#include "estatcom/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "estatcom/analysis.hpp"
#include "estatcom/controller.hpp"
#include "estatcom/engine.hpp"

namespace estatcom::verify {

namespace {

using Clock = std::chrono::steady_clock;

Check make_check(Criterion c, std::string name, bool pass, std::string detail) {
  return {c, std::move(name), pass, std::move(detail)};
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const Options& opt, const std::string& file, const std::function<void(std::ostream&)>& body) {
  if (opt.out_dir.empty()) return;
  std::filesystem::create_directories(opt.out_dir);
  std::ofstream os(std::filesystem::path(opt.out_dir) / file);
  if (!os) throw std::runtime_error("cannot write " + file + " in " + opt.out_dir);
  body(os);
}

void write_bode(const Options& opt, const std::string& file, const TransferFunction& tf) {
  write_text(opt, file, [&](std::ostream& os) { write_bode_csv(os, bode(tf, log_frequency_grid())); });
}

void write_run(const Options& opt, const std::string& stem, const ScenarioConfig& cfg, const RunResult& r) {
  write_text(opt, stem + ".csv", [&](std::ostream& os) { r.log.write_csv(os); });
  write_text(opt, stem + "_summary.txt", [&](std::ostream& os) { write_summary(os, cfg, r); });
}

struct Stats {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  double mean = 0.0;
  double max_abs = 0.0;
  std::size_t n = 0;
};

// Samples with t1 <= t <= t2. The log is uniformly sampled, so the sample mean is the time mean.
Stats window(const WaveformLog& log, const std::string& channel, double t1, double t2) {
  const auto& t = log.t();
  const auto& x = log.channel(channel);
  Stats s;
  double sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t1 - 1e-12 || t[k] > t2 + 1e-12) continue;
    s.min = std::min(s.min, x[k]);
    s.max = std::max(s.max, x[k]);
    s.max_abs = std::max(s.max_abs, std::abs(x[k]));
    sum += x[k];
    ++s.n;
  }
  if (s.n == 0) throw std::runtime_error("empty window on channel " + channel);
  s.mean = sum / static_cast<double>(s.n);
  return s;
}

// Linear interpolation of a channel at time t, clamped to the logged range.
double sample_at(const WaveformLog& log, const std::string& channel, double t) {
  const auto& ts = log.t();
  const auto& x = log.channel(channel);
  if (ts.empty()) throw std::runtime_error("empty log");
  if (t <= ts.front()) return x.front();
  if (t >= ts.back()) return x.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  const double a = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
  return x[k - 1] + a * (x[k] - x[k - 1]);
}

double event_time(const ScenarioConfig& cfg, EventKind kind, int occurrence = 0) {
  for (const Event& e : cfg.events) {
    if (e.kind == kind && occurrence-- == 0) return e.t;
  }
  throw std::runtime_error(fmt::format("preset {} has no {} event", cfg.name, to_string(kind)));
}

double event_value(const ScenarioConfig& cfg, EventKind kind) {
  for (const Event& e : cfg.events) {
    if (e.kind == kind) return e.value;
  }
  throw std::runtime_error(fmt::format("preset {} has no {} event", cfg.name, to_string(kind)));
}

const Event& frequency_event(const ScenarioConfig& cfg, int occurrence) {
  for (const Event& e : cfg.events) {
    if (e.kind == EventKind::SetGridFrequency && occurrence-- == 0) return e;
  }
  throw std::runtime_error("preset " + cfg.name + " has too few frequency events");
}

// Duration of the frequency transition started by `e`, given the frequency before it.
double ramp_duration(const ScenarioConfig& cfg, const Event& e, double f_before) {
  const double df = std::abs(e.value - f_before);
  if (e.ramp_rate) return *e.ramp_rate > 0.0 ? df / *e.ramp_rate : 0.0;
  return cfg.frequency_ramp_s;
}

std::string g(double x) { return fmt::format("{:.4g}", x); }

}  // namespace

Suite suite_from_string(const std::string& name) {
  if (name == "smallsignal") return Suite::SmallSignal;
  if (name == "timedomain") return Suite::TimeDomain;
  if (name == "all") return Suite::All;
  throw std::invalid_argument("unknown suite '" + name + "' (expected smallsignal, timedomain or all)");
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::Margins: return "small-signal margins";
    case Criterion::Feedforward: return "feedforward decoupling";
    case Criterion::Scenario: return "scenario reproduction";
    case Criterion::Inertia: return "inertial-response shaping";
    case Criterion::Trip: return "trip reproduction";
    case Criterion::Properties: return "property suites";
  }
  return "?";
}

double runtime_budget_s(Criterion c) {
  switch (c) {
    case Criterion::Margins: return 1.0;
    case Criterion::Feedforward: return 1.0;
    case Criterion::Scenario: return 60.0;
    case Criterion::Inertia: return 90.0;
    case Criterion::Trip: return 60.0;
    case Criterion::Properties: return 30.0;
  }
  return 0.0;
}

bool CriterionResult::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::vector<Check> check_margins(const Options& opt) {
  const Criterion C = Criterion::Margins;
  std::vector<Check> out;

  LoopCase sep;
  sep.apc_bw = 3.0;
  sep.tec_bw = 0.3;
  const LoopSet a = build_loops(sep);
  const MarginReport ra = margins(a.loop_gain);
  out.push_back(make_check(C, "PM(tec 0.3 Hz) in [70.8, 80.8] deg",
                           ra.has_crossover && ra.phase_margin_deg >= 70.8 && ra.phase_margin_deg <= 80.8,
                           fmt::format("PM = {:.2f} deg at {:.4g} Hz", ra.phase_margin_deg,
                                       ra.has_crossover ? ra.gain_crossovers_hz.front() : 0.0)));
  out.push_back(make_check(C, "tec 0.3 Hz loop stable", ra.stable, ra.stable ? "stable" : "unstable"));

  LoopCase tight = sep;
  tight.tec_bw = 10.0;
  const LoopSet b = build_loops(tight);
  const MarginReport rb = margins(b.loop_gain);
  out.push_back(make_check(C, "PM(tec 10 Hz) in [-6.7, 3.3] deg",
                           rb.has_crossover && rb.phase_margin_deg >= -6.7 && rb.phase_margin_deg <= 3.3,
                           fmt::format("PM = {:.2f} deg at {:.4g} Hz", rb.phase_margin_deg,
                                       rb.has_crossover ? rb.gain_crossovers_hz.front() : 0.0)));
  out.push_back(make_check(C, "tec 10 Hz loop unstable", !rb.stable, rb.stable ? "stable" : "unstable"));

  write_bode(opt, "bode_loop_tec0.3.csv", a.loop_gain);
  write_bode(opt, "bode_loop_tec10.csv", b.loop_gain);
  write_text(opt, "margins.txt", [&](std::ostream& os) {
    os << "# apc_bw=3 Hz tec_bw=0.3 Hz zeta=0.707\n" << format_margin_report(ra);
    os << "# apc_bw=3 Hz tec_bw=10 Hz zeta=0.707\n" << format_margin_report(rb);
  });
  return out;
}

std::vector<Check> check_feedforward(const Options& opt) {
  const Criterion C = Criterion::Feedforward;
  std::vector<Check> out;
  LoopCase c;
  c.apc_bw = 3.0;
  c.tec_bw = 10.0;
  const LoopSet ls = build_loops(c);
  const double cc_bw = kTwoPi * ControlDesign{}.cc_bw_hz;
  const TransferFunction noff = make_tec_closed_loop(ls.tec.K_PW, ls.tec.K_IW, ls.apc_cl, false, cc_bw);
  const TransferFunction ff = make_tec_closed_loop(ls.tec.K_PW, ls.tec.K_IW, ls.apc_cl, true, cc_bw);

  const auto grid = log_frequency_grid(0.01, 1000.0, 4000);
  const FrequencyResponse rn = bode(noff, grid);
  const FrequencyResponse rf = bode(ff, grid);
  const double peak_n = *std::max_element(rn.mag_db.begin(), rn.mag_db.end());
  const double peak_f = *std::max_element(rf.mag_db.begin(), rf.mag_db.end());
  double dev = 0.0;
  double f_dev = 0.0;
  for (std::size_t k = 0; k < grid.size() && grid[k] < 10.0; ++k) {
    if (std::abs(rf.mag_db[k]) > dev) {
      dev = std::abs(rf.mag_db[k]);
      f_dev = grid[k];
    }
  }
  out.push_back(make_check(C, "peak(no ff) - peak(ff) > 3 dB", peak_n - peak_f > 3.0,
                           fmt::format("{:.2f} dB vs {:.2f} dB, separation {:.2f} dB", peak_n, peak_f,
                                       peak_n - peak_f)));
  out.push_back(make_check(C, "|ff response| < 1 dB below 10 Hz", dev < 1.0,
                           fmt::format("max deviation {:.3f} dB at {:.3g} Hz", dev, f_dev)));

  write_bode(opt, "bode_tec_noff.csv", noff);
  write_bode(opt, "bode_tec_ff.csv", ff);
  return out;
}

std::vector<Check> check_scenario(const Options& opt) {
  const Criterion C = Criterion::Scenario;
  std::vector<Check> out;
  const ScenarioConfig cfg = make_preset("fig10-scenario");
  const ScenarioConfig scfg = make_preset("fig14-statcom");
  auto fut = std::async(std::launch::async, [&] { return run_scenario(scfg); });
  const RunResult r = run_scenario(cfg);
  const RunResult sr = fut.get();
  write_run(opt, "fig10-scenario", cfg, r);
  write_run(opt, "fig14-statcom", scfg, sr);

  const double f_nom = cfg.params.grid.f_nominal;
  out.push_back(make_check(C, "scenario completes", r.status == ExitStatus::Completed,
                           r.status == ExitStatus::Completed ? "completed" : "trip: " + r.trip_reason));
  if (r.status != ExitStatus::Completed || r.boost_complete_time < 0.0) return out;

  // (a) boost through the ac side with the dc MC open.
  const double t_boost = event_time(cfg, EventKind::EnableEnergyBoost);
  const double t_mc = event_time(cfg, EventKind::CloseDcMC);
  const double t_done = r.boost_complete_time;
  const Stats pdc_boost = window(r.log, "P_dc", t_boost, t_done);
  const Stats pdcm_boost = window(r.log, "P_dc_meas", t_boost, t_done);
  const double W0 = sample_at(r.log, "W_total", t_boost);
  const double W1 = sample_at(r.log, "W_total", t_done);
  const double E_ac_in = -inertial_energy(r.log, t_boost, t_done);
  out.push_back(make_check(C, "(a) boost completes before dc MC closes", t_done < t_mc,
                           fmt::format("boost complete at {:.3f} s, MC closes at {:.3f} s", t_done, t_mc)));
  out.push_back(make_check(C, "(a) zero dc exchange during boost", pdc_boost.max_abs == 0.0 && pdcm_boost.max_abs == 0.0,
                           fmt::format("max |P_dc| = {} W, max |P_dc,meas| = {} W", g(pdc_boost.max_abs),
                                       g(pdcm_boost.max_abs))));
  out.push_back(make_check(C, "(a) boost energy drawn from ac side", W1 > W0 && E_ac_in >= W1 - W0,
                           fmt::format("dW = {} J, ac energy absorbed = {} J", g(W1 - W0), g(E_ac_in))));

  // (b) energy band from boost completion to the end, covering dip, restore and Q step.
  const double t_dip = frequency_event(cfg, 0).t;
  const double t_restore = frequency_event(cfg, 1).t;
  const double t_q = event_time(cfg, EventKind::SetQRef);
  const double t_end = r.log.t().back();
  bool band_ok = !r.bands.empty();
  std::string band_detail;
  for (const BandResult& b : r.bands) {
    band_ok = band_ok && b.pass && b.t_start <= t_dip && b.t_end >= t_q;
    band_detail += fmt::format("{} in +/-{:.0f}% on [{:.3f}, {:.3f}] s, worst {:.2f}%", b.channel, b.pct * 100.0,
                               b.t_start, b.t_end, b.worst_excursion * 100.0);
  }
  out.push_back(make_check(C, "(b) W_total within +/-10% of W_ref after boost", band_ok, band_detail));
  const double q_ref = event_value(cfg, EventKind::SetQRef);
  const Stats q_final = window(r.log, "Q_ac", t_end - 0.3, t_end);
  out.push_back(make_check(C, "(b) rated Q injected", q_final.mean >= 0.9 * q_ref && q_ref > 0.0,
                           fmt::format("mean Q_ac {} var over last 0.3 s, Q_ref {} var", g(q_final.mean), g(q_ref))));

  // (c) dc power sign through the dip and the restore.
  const Event& dip = frequency_event(cfg, 0);
  const Event& restore = frequency_event(cfg, 1);
  const double ramp_dip = ramp_duration(cfg, dip, f_nom);
  const double ramp_restore = ramp_duration(cfg, restore, dip.value);
  const Stats pdc_dip = window(r.log, "P_dc", t_dip + 0.1 * ramp_dip, t_dip + ramp_dip);
  const Stats pdc_rest = window(r.log, "P_dc", t_restore + 0.1 * ramp_restore, t_restore + ramp_restore);
  out.push_back(make_check(C, "(c) P_dc > 0 during dip", pdc_dip.min > 0.0,
                           fmt::format("min P_dc {} W on [{:.2f}, {:.2f}] s", g(pdc_dip.min), t_dip + 0.1 * ramp_dip,
                                       t_dip + ramp_dip)));
  out.push_back(make_check(C, "(c) P_dc < 0 during restore", pdc_rest.max < 0.0,
                           fmt::format("max P_dc {} W on [{:.2f}, {:.2f}] s", g(pdc_rest.max),
                                       t_restore + 0.1 * ramp_restore, t_restore + ramp_restore)));

  // (d) STATCOM mode: no active power for the same dip, no dc exchange at all.
  out.push_back(make_check(C, "(d) STATCOM run completes", sr.status == ExitStatus::Completed,
                           sr.status == ExitStatus::Completed ? "completed" : "trip: " + sr.trip_reason));
  if (sr.status == ExitStatus::Completed) {
    const double t_sdip = frequency_event(scfg, 0).t;
    const Stats pac = window(sr.log, "P_ac", t_sdip, sr.log.t().back());
    const Stats pdc = window(sr.log, "P_dc", 0.0, sr.log.t().back());
    const Stats pdcr = window(sr.log, "P_dc_ref", 0.0, sr.log.t().back());
    const Stats pdcm = window(sr.log, "P_dc_meas", 0.0, sr.log.t().back());
    out.push_back(make_check(C, "(d) STATCOM |mean P_ac| < 2% S", std::abs(pac.mean) < 0.02 * scfg.params.S_rated,
                             fmt::format("mean P_ac {} W = {:.3f}% of S", g(pac.mean),
                                         100.0 * std::abs(pac.mean) / scfg.params.S_rated)));
    out.push_back(make_check(C, "(d) STATCOM P_dc identically 0",
                             pdc.max_abs == 0.0 && pdcr.max_abs == 0.0 && pdcm.max_abs == 0.0,
                             fmt::format("max |P_dc| {}, |P_dc_ref| {}, |P_dc,meas| {} W", g(pdc.max_abs),
                                         g(pdcr.max_abs), g(pdcm.max_abs))));
  }
  return out;
}

namespace {

struct InertiaTrace {
  double H = 0.0;
  double energy = 0.0;
  double nrmse = 0.0;
  double max_dfdt = 0.0;
  bool completed = false;
};

InertiaTrace inertia_trace(double H, const Options& opt) {
  const std::string name = fmt::format("fig14-h{:.0f}", H);
  const ScenarioConfig cfg = make_preset(name);
  const RunResult r = run_scenario(cfg);
  write_run(opt, name, cfg, r);
  InertiaTrace tr;
  tr.H = H;
  tr.completed = r.status == ExitStatus::Completed;
  if (!tr.completed) return tr;

  const Event& dip = frequency_event(cfg, 0);
  const double ramp = ramp_duration(cfg, dip, cfg.params.grid.f_nominal);
  const double t1 = dip.t;
  const double t2 = dip.t + ramp;
  tr.energy = inertial_energy(r.log, t1, t2);

  // Linear prediction from the small-signal model with the controller's own gains.
  const ControlGains gains = design_gains(cfg.params, cfg.design);
  const double P_max = synchronizing_power(cfg.params, cfg.design);
  const TransferFunction G = make_inertial_tf(P_max, gains.K_P, gains.K_I);
  const auto& t = r.log.t();
  const auto& f_grid = r.log.channel("f_grid");
  const auto& p_ac = r.log.channel("P_ac");
  std::size_t k0 = 0;
  while (k0 < t.size() && t[k0] < t1 - 1e-12) ++k0;
  const double baseline = window(r.log, "P_ac", t1 - 0.1, t1).mean;
  const double dt_log = t[k0 + 1] - t[k0];
  std::vector<double> u;
  for (std::size_t k = k0; k < t.size() && t[k] <= t2 + 1e-12; ++k) {
    u.push_back(kTwoPi * (f_grid[k] - f_grid[k0]));
  }
  const std::vector<double> y = lsim(G, u, dt_log);
  double se = 0.0;
  double peak = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double e = (p_ac[k0 + j] - baseline) - y[j];
    se += e * e;
    peak = std::max(peak, std::abs(y[j]));
  }
  tr.nrmse = std::sqrt(se / static_cast<double>(y.size())) / peak;

  const auto& f = r.log.channel("f_conv");
  for (std::size_t k = std::max<std::size_t>(k0, 1); k + 1 < t.size(); ++k) {
    tr.max_dfdt = std::max(tr.max_dfdt, std::abs((f[k + 1] - f[k - 1]) / (t[k + 1] - t[k - 1])));
  }
  if (!opt.out_dir.empty()) {
    write_text(opt, name + "_prediction.csv", [&](std::ostream& os) {
      os << "t,P_ac_sim,P_ac_pred\n";
      for (std::size_t j = 0; j < y.size(); ++j) {
        os << fmt::format("{:.10g},{:.10g},{:.10g}\n", t[k0 + j], p_ac[k0 + j], y[j] + baseline);
      }
    });
  }
  return tr;
}

}  // namespace

std::vector<Check> check_inertia(const Options& opt) {
  const Criterion C = Criterion::Inertia;
  std::vector<Check> out;
  std::vector<std::future<InertiaTrace>> jobs;
  for (double H : {10.0, 20.0, 30.0}) {
    jobs.push_back(std::async(std::launch::async, [H, &opt] { return inertia_trace(H, opt); }));
  }
  std::vector<InertiaTrace> tr;
  for (auto& j : jobs) tr.push_back(j.get());

  bool completed = true;
  for (const auto& x : tr) completed = completed && x.completed;
  out.push_back(make_check(C, "H sweep runs complete", completed, completed ? "3/3 completed" : "trip in sweep"));
  if (!completed) return out;

  const bool e_inc = tr[0].energy < tr[1].energy && tr[1].energy < tr[2].energy;
  out.push_back(make_check(C, "inertial energy strictly increasing in H", e_inc,
                           fmt::format("{} / {} / {} J", g(tr[0].energy), g(tr[1].energy), g(tr[2].energy))));
  bool fit = true;
  std::string fit_detail;
  for (const auto& x : tr) {
    fit = fit && x.nrmse < 0.10;
    fit_detail += fmt::format("{}H={:.0f}: {:.2f}%", fit_detail.empty() ? "" : ", ", x.H, 100.0 * x.nrmse);
  }
  out.push_back(make_check(C, "P_ac vs linear prediction nRMSE < 10%", fit, fit_detail));
  const bool d_dec = tr[0].max_dfdt > tr[1].max_dfdt && tr[1].max_dfdt > tr[2].max_dfdt;
  out.push_back(make_check(C, "max |df_conv/dt| strictly decreasing in H", d_dec,
                           fmt::format("{:.5f} / {:.5f} / {:.5f} Hz/s", tr[0].max_dfdt, tr[1].max_dfdt,
                                       tr[2].max_dfdt)));
  return out;
}

std::vector<Check> check_trip(const Options& opt) {
  const Criterion C = Criterion::Trip;
  std::vector<Check> out;
  const ScenarioConfig noff = make_preset("fig12a-noff");
  ScenarioConfig ff = noff;
  ff.design.feedforward = true;
  auto fut = std::async(std::launch::async, [&] { return run_scenario(ff); });
  const RunResult rn = run_scenario(noff);
  const RunResult rf = fut.get();
  write_run(opt, "fig12a-noff", noff, rn);
  write_run(opt, "fig12a-ff", ff, rf);

  out.push_back(make_check(C, "no feedforward ends in Trip", rn.status == ExitStatus::Trip,
                           rn.status == ExitStatus::Trip
                               ? fmt::format("trip at {:.4f} s: {}", rn.trip_time, rn.trip_reason)
                               : "completed without trip"));
  const bool ok = rf.status == ExitStatus::Completed;
  out.push_back(make_check(C, "with feedforward completes", ok, ok ? "completed" : "trip: " + rf.trip_reason));
  bool band = ok && !rf.bands.empty();
  std::string detail;
  for (const BandResult& b : rf.bands) {
    band = band && b.pass;
    detail += fmt::format("{} worst {:.2f}% on [{:.3f}, {:.3f}] s", b.channel, b.worst_excursion * 100.0, b.t_start,
                          b.t_end);
  }
  out.push_back(make_check(C, "with feedforward passes band_check", band, detail));
  return out;
}

// Property suites.

namespace {

/// Down-scale rig charged to `v_C_pu`, deblocked with balancing, run under the
/// full controller. Callbacks see every control output and every plant step.
struct Rig {
  ConverterParams p;
  ControlDesign design;
  ControlSetpoints sp;
  double dt_control = 100e-6;
  int substeps = 5;
  GridSource grid;
  ConverterState state;
  Controller ctrl;

  explicit Rig(double v_C_pu)
      : p(make_preset("table2-downscale").params),
        sp{p.W_rated(), 0.0, 0.5, 0.0},
        grid(p.grid),
        ctrl(p, design, sp, Mode::EStatcom, dt_control) {
    state.v_C.fill(v_C_pu * p.v_arm_rated());
    state.precharge_bypassed = true;
    state.blocked = false;
    ctrl.enable_energy_boost(grid.converter_side(0.0));
    ctrl.enable_balancing();
  }
};

}  // namespace

Check energy_balance_property() {
  const Criterion C = Criterion::Properties;
  Rig rig(0.6);
  const ConverterParams& p = rig.p;
  const double dt = rig.dt_control / rig.substeps;
  const double T = 1.0;
  const long steps = std::lround(T / rig.dt_control);

  auto inductor_energy = [&](const ConverterState& s) {
    double e = 0.0;
    for (double i : s.i_arm) e += 0.5 * p.L_arm * i * i;
    return e;
  };
  // Power balance at the arm terminals: dc port in, ac node out, arm resistance losses.
  auto net_power = [&](const ConverterState& s, const ArmArray& m, double t, double& p_dc, double& p_ac) {
    const PlantDerivative d = plant_derivatives(s, m, rig.grid.converter_side(t), p.V_dc_rated, p);
    double i_dc = 0.0;
    p_ac = 0.0;
    double loss = 0.0;
    for (int x = 0; x < 3; ++x) {
      i_dc += circulating_current(s, x);
      p_ac += d.v_node[x] * ac_current(s, x);
    }
    for (double i : s.i_arm) loss += p.R_arm * i * i;
    p_dc = d.v_dc * i_dc;
    return p_dc - p_ac - loss;
  };

  const double W0 = total_internal_energy(rig.state, p) + inductor_energy(rig.state);
  double integral = 0.0;
  double throughput = 0.0;
  for (long k = 0; k < steps; ++k) {
    const double t = k * rig.dt_control;
    if (k == steps / 2) {
      rig.state.dc_mc_closed = true;  // second half exchanges power through the dc port
    }
    ControllerInput in;
    in.plant = &rig.state;
    in.v_pcc = rig.grid.converter_side(t);
    in.storage_P_dc = rig.state.dc_mc_closed ? 0.25 * p.S_rated : 0.0;
    in.storage_available = true;
    const ControllerOutput out = rig.ctrl.step(in);
    for (int j = 0; j < rig.substeps; ++j) {
      const double ts = t + j * dt;
      double pd0 = 0.0, pa0 = 0.0, pd1 = 0.0, pa1 = 0.0;
      const double n0 = net_power(rig.state, out.m, ts, pd0, pa0);
      rig.state = rk4_step(rig.state, out.m, rig.grid, ts, dt, p.V_dc_rated, p).state;
      const double n1 = net_power(rig.state, out.m, ts + dt, pd1, pa1);
      // Simpson would need the stage values; trapezoid on the plant grid is enough here.
      integral += 0.5 * dt * (n0 + n1);
      throughput += 0.5 * dt * (std::abs(pd0) + std::abs(pa0) + std::abs(pd1) + std::abs(pa1));
    }
  }
  const double W1 = total_internal_energy(rig.state, p) + inductor_energy(rig.state);
  const double residual = (W1 - W0) - integral;
  const double rel = std::abs(residual) / throughput;
  return make_check(C, "energy balance over 1 s (rel < 1e-3)", rel < 1e-3,
                    fmt::format("dW = {} J, integral = {} J, residual {} J, rel {:.2e} of {} J throughput",
                                g(W1 - W0), g(integral), g(residual), rel, g(throughput)));
}

Check apc_identity_property() {
  const Criterion C = Criterion::Properties;
  Rig rig(1.0);
  const ConverterParams& p = rig.p;
  const double w_nom = p.omega_nominal();
  double worst = 0.0;
  long n = 0;
  rig.state.dc_mc_closed = true;
  rig.grid.command(0.05, GridCommand{59.8, 1.0, 0.4});
  for (long k = 0; k < 5000; ++k) {
    const double t = k * rig.dt_control;
    ControllerInput in;
    in.plant = &rig.state;
    in.v_pcc = rig.grid.converter_side(t);
    in.storage_available = true;
    const ControllerOutput out = rig.ctrl.step(in);
    const double lhs = out.omega_conv - w_nom;
    const double rhs = out.omega_conv_P + out.omega_conv_I;
    worst = std::max(worst, std::abs(lhs - rhs) / (4.0 * std::numeric_limits<double>::epsilon() * w_nom));
    ++n;
    for (int j = 0; j < rig.substeps; ++j) {
      const double dt = rig.dt_control / rig.substeps;
      rig.state = rk4_step(rig.state, out.m, rig.grid, t + j * dt, dt, p.V_dc_rated, p).state;
    }
  }
  // Isolated random excitation of the same law.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ControlGains gains;
  gains.K_P = 1e-3;
  gains.K_I = 0.05;
  ApcState s;
  s.omega_conv = w_nom;
  for (int k = 0; k < 20000; ++k) {
    s = apc_step(s, gains, w_nom, 1e3 * U(rng), 1e3 * U(rng), 1e-4);
    const double lhs = s.omega_conv - w_nom;
    const double rhs = s.omega_conv_P + s.omega_conv_I;
    worst = std::max(worst, std::abs(lhs - rhs) / (4.0 * std::numeric_limits<double>::epsilon() * w_nom));
    ++n;
  }
  return make_check(C, "omega_conv - omega_nom = omega_P + omega_I each step", worst <= 1.0,
                    fmt::format("{} steps, worst deviation {:.2f} of 4 ulp(omega_nom)", n, worst));
}

Check feedforward_inverse_property(unsigned seed, int samples) {
  const Criterion C = Criterion::Properties;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double v_d_min = 0.1;
  double worst = 0.0;
  int n = 0;
  while (n < samples) {
    const double vd = (v_d_min + 2.0 * std::abs(U(rng))) * (U(rng) < 0.0 ? -1.0 : 1.0);
    const Dq v{vd, 1.5 * U(rng), 0.0};
    const double i_q = 3.0 * U(rng);
    const double P_ref = 5.0 * U(rng);
    if (std::abs(P_ref) < 1e-3) continue;
    const FeedforwardResult ff = feedforward_current(P_ref, v, i_q, v_d_min);
    const double P = compute_pac(v, {ff.i_dref_ff, i_q, 0.0});
    worst = std::max(worst, std::abs(P - P_ref) / std::abs(P_ref));
    ++n;
  }
  return make_check(C, "feedforward inverse (randomized, rel < 1e-9)", worst < 1e-9,
                    fmt::format("{} samples, worst rel error {:.2e}", n, worst));
}

Check frame_round_trip_property(unsigned seed, int samples) {
  const Criterion C = Criterion::Properties;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < samples; ++n) {
    const double scale = std::pow(10.0, 4.0 * U(rng));
    const Abc abc{scale * U(rng), scale * U(rng), scale * U(rng)};
    const double theta = 20.0 * U(rng);
    const Abc back = inverse_park(park(abc, theta), theta);
    const double mag = std::max({std::abs(abc[0]), std::abs(abc[1]), std::abs(abc[2])});
    for (int x = 0; x < 3; ++x) worst = std::max(worst, std::abs(back[x] - abc[x]) / mag);
  }
  return make_check(C, "frame round trip (rel < 1e-12)", worst < 1e-12,
                    fmt::format("{} samples, worst rel error {:.2e}", samples, worst));
}

Check rational_closure_property(unsigned seed, int samples) {
  const Criterion C = Criterion::Properties;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> deg(0, 3);
  auto random_poly = [&](int d) {
    Poly p(d + 1);
    for (double& c : p) c = 2.0 * U(rng);
    if (std::abs(p.front()) < 0.1) p.front() = p.front() < 0.0 ? -0.5 : 0.5;
    return p;
  };
  double worst = 0.0;
  int evaluations = 0;
  for (int n = 0; n < samples; ++n) {
    const TransferFunction a(random_poly(deg(rng)), random_poly(1 + deg(rng) % 3));
    const TransferFunction b(random_poly(deg(rng)), random_poly(1 + deg(rng) % 3));
    const std::array<TransferFunction, 6> ops{a + b, a - b, a * b, a / b, a.feedback(b), -a};
    for (int k = 0; k < 5; ++k) {
      const Complex s(0.5 * U(rng), std::pow(10.0, 2.5 * U(rng)));
      const Complex A = a(s);
      const Complex B = b(s);
      const std::array<Complex, 6> ref{A + B, A - B, A * B, A / B, A / (1.0 + A * B), -A};
      const std::array<double, 6> scale{std::abs(A) + std::abs(B), std::abs(A) + std::abs(B),
                                        std::abs(ref[2]), std::abs(ref[3]), std::abs(ref[4]), std::abs(A)};
      for (int o = 0; o < 6; ++o) {
        if (!(scale[o] > 0.0) || !std::isfinite(std::abs(ref[o]))) continue;
        worst = std::max(worst, std::abs(ops[o](s) - ref[o]) / scale[o]);
        ++evaluations;
      }
    }
  }
  return make_check(C, "rational arithmetic closure (randomized, rel < 1e-9)", worst < 1e-9,
                    fmt::format("{} evaluations, worst rel error {:.2e}", evaluations, worst));
}

Check stability_agreement_property(unsigned seed, int cases) {
  const Criterion C = Criterion::Properties;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int agree = 0;
  int n_stable = 0;
  std::string disagreements;
  for (int n = 0; n < cases; ++n) {
    LoopCase c;
    c.apc_bw = 1.0 + 9.0 * U(rng);
    c.tec_bw = c.apc_bw * 0.05 * std::pow(100.0, U(rng));  // tec/apc ratio spans the stability boundary
    c.zeta = 0.4 + 0.6 * U(rng);
    const LoopSet ls = build_loops(c);
    const bool stable = margins(ls.loop_gain).stable;

    // Step response of W / W_ref; bounded iff the tail error does not outgrow the middle.
    const TransferFunction cl = ls.loop_gain.feedback();
    const double f_hi = std::max(c.apc_bw, c.tec_bw);
    const double f_lo = std::min(c.apc_bw, c.tec_bw);
    const double dt = 1.0 / (40.0 * kTwoPi * f_hi);
    const double T = 40.0 / f_lo;
    const std::size_t N = static_cast<std::size_t>(T / dt);
    const std::vector<double> y = lsim(cl, std::vector<double>(N, 1.0), dt);
    double mid = 0.0, tail = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < N; ++k) {
      if (!std::isfinite(y[k])) {
        finite = false;
        break;
      }
      const double e = std::abs(y[k] - 1.0);
      if (k >= 2 * N / 5 && k < 3 * N / 5) mid = std::max(mid, e);
      if (k >= 4 * N / 5) tail = std::max(tail, e);
    }
    const bool bounded = finite && tail <= mid;
    if (bounded == stable) {
      ++agree;
    } else {
      disagreements += fmt::format(" [apc {:.2f} tec {:.3f} zeta {:.2f}]", c.apc_bw, c.tec_bw, c.zeta);
    }
    n_stable += stable ? 1 : 0;
  }
  return make_check(C, "margins vs time-domain stability (random LoopCases)", agree == cases,
                    fmt::format("{}/{} agree ({} stable, {} unstable){}", agree, cases, n_stable, cases - n_stable,
                                disagreements));
}

std::vector<Check> check_properties(const Options&) {
  return {energy_balance_property(),     apc_identity_property(),     feedforward_inverse_property(),
          frame_round_trip_property(),   rational_closure_property(), stability_agreement_property()};
}

CriterionResult run_criterion(Criterion c, const Options& opt) {
  CriterionResult r;
  r.criterion = c;
  const auto t0 = Clock::now();
  try {
    switch (c) {
      case Criterion::Margins: r.checks = check_margins(opt); break;
      case Criterion::Feedforward: r.checks = check_feedforward(opt); break;
      case Criterion::Scenario: r.checks = check_scenario(opt); break;
      case Criterion::Inertia: r.checks = check_inertia(opt); break;
      case Criterion::Trip: r.checks = check_trip(opt); break;
      case Criterion::Properties: r.checks = check_properties(opt); break;
    }
  } catch (const std::exception& ex) {
    r.checks.push_back(make_check(c, "runner", false, std::string("exception: ") + ex.what()));
  }
  r.seconds = since(t0);
  const double budget = runtime_budget_s(c);
  r.checks.push_back(make_check(c, fmt::format("runtime < {:g} s", budget), r.seconds < budget,
                                fmt::format("{:.3f} s", r.seconds)));
  return r;
}

std::vector<Criterion> criteria(Suite suite) {
  switch (suite) {
    case Suite::SmallSignal: return {Criterion::Margins, Criterion::Feedforward};
    case Suite::TimeDomain:
      return {Criterion::Scenario, Criterion::Inertia, Criterion::Trip, Criterion::Properties};
    case Suite::All: break;
  }
  return {Criterion::Margins,  Criterion::Feedforward, Criterion::Scenario,
          Criterion::Inertia, Criterion::Trip,        Criterion::Properties};
}

std::vector<CriterionResult> run_suite(Suite suite, const Options& opt) {
  std::vector<CriterionResult> out;
  for (Criterion c : criteria(suite)) out.push_back(run_criterion(c, opt));
  return out;
}

void print_table(std::ostream& os, const std::vector<CriterionResult>& results) {
  std::size_t w_name = 5;
  for (const auto& r : results) {
    for (const auto& c : r.checks) w_name = std::max(w_name, c.name.size());
  }
  os << fmt::format("{:<26} {:<{}} {:<6} {}\n", "criterion", "check", w_name, "result", "detail");
  for (const auto& r : results) {
    for (const auto& c : r.checks) {
      os << fmt::format("{:<26} {:<{}} {:<6} {}\n", to_string(r.criterion), c.name, w_name, c.pass ? "ok" : "FAIL",
                        c.detail);
    }
  }
  os << '\n';
  for (const auto& r : results) {
    os << fmt::format("{} {} ({:.2f} s)\n", r.pass() ? "PASS" : "FAIL", to_string(r.criterion), r.seconds);
  }
}

bool all_pass(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.pass(); });
}

}  // namespace estatcom::verify
