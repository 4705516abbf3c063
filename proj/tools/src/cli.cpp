#include "estatcom/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "estatcom/analysis.hpp"
#include "estatcom/controller.hpp"
#include "estatcom/engine.hpp"
#include "estatcom/verify.hpp"

namespace estatcom::cli {

namespace {

namespace fs = std::filesystem;

/// Validation failure attributable to a single flag.
struct FlagError : std::runtime_error {
  FlagError(const std::string& flag, const std::string& what) : std::runtime_error(flag + ": " + what) {}
};

void require_positive(double v, const std::string& flag) {
  if (!(v > 0.0) || !std::isfinite(v)) throw FlagError(flag, "must be a positive number");
}

void require_path(const std::string& path, const std::string& flag) {
  if (path.empty()) throw FlagError(flag, "must be a non-empty path");
}

std::ofstream open_out(const fs::path& path, const std::string& flag) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw FlagError(flag, "cannot write " + path.string());
  return os;
}

std::string safe_stem(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

// simulate

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::string out_dir;
  std::string feedforward;  // "", on, off
  bool list = false;
  bool dump = false;
};

ScenarioConfig load_config(const std::string& preset, const std::string& config) {
  if (!preset.empty() && !config.empty()) throw FlagError("--preset", "cannot be combined with --config");
  if (preset.empty() && config.empty()) throw FlagError("--preset", "either --preset or --config is required");
  if (!preset.empty()) {
    if (!is_preset(preset)) throw FlagError("--preset", "unknown preset '" + preset + "'");
    return make_preset(preset);
  }
  try {
    return load_scenario(config);
  } catch (const std::exception& ex) {
    throw FlagError("--config", ex.what());
  }
}

void apply_feedforward(ScenarioConfig& cfg, const std::string& ff) {
  if (ff == "on") cfg.design.feedforward = true;
  if (ff == "off") cfg.design.feedforward = false;
}

void write_run(const fs::path& dir, const std::string& stem, const ScenarioConfig& cfg, const RunResult& r,
               const std::string& flag) {
  fs::create_directories(dir);
  auto csv = open_out(dir / (stem + ".csv"), flag);
  r.log.write_csv(csv);
  auto summary = open_out(dir / (stem + "_summary.txt"), flag);
  write_summary(summary, cfg, r);
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.list) {
    for (const auto& n : preset_names()) out << n << '\n';
    return kOk;
  }
  ScenarioConfig cfg = load_config(a.preset, a.config);
  apply_feedforward(cfg, a.feedforward);
  if (a.dump) {
    out << scenario_to_json(cfg) << '\n';
    return kOk;
  }
  require_path(a.out_dir, "--out");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& ex) {
    throw FlagError(a.config.empty() ? "--preset" : "--config", ex.what());
  }
  const RunResult r = run_scenario(cfg);
  write_run(a.out_dir, safe_stem(cfg.name), cfg, r, "--out");
  write_summary(out, cfg, r);
  return r.status == ExitStatus::Trip ? kTrip : kOk;
}

// bode / margins

struct LoopArgs {
  double apc_bw = 3.0;
  double tec_bw = 0.3;
  double zeta = 0.707;
  double E = 1.0;
  double V = 1.0;
  double X = 0.3;
  double tec_scale = TecMapping{}.scale;
  double tec_ratio = TecMapping{}.ratio;
};

void add_loop_flags(CLI::App* app, LoopArgs& a) {
  app->add_option("--apc-bw,--bw", a.apc_bw, "APC closed-loop bandwidth (Hz)")->capture_default_str();
  app->add_option("--tec-bw", a.tec_bw, "TEC bandwidth (Hz)")->capture_default_str();
  app->add_option("--zeta", a.zeta, "APC damping ratio")->capture_default_str();
  app->add_option("--E", a.E, "internal voltage (pu)")->capture_default_str();
  app->add_option("--V", a.V, "grid voltage (pu)")->capture_default_str();
  app->add_option("--X", a.X, "equivalent reactance (pu)")->capture_default_str();
  app->add_option("--tec-scale", a.tec_scale, "TEC mapping: K_PW = scale 2 pi bw")->capture_default_str();
  app->add_option("--tec-ratio", a.tec_ratio, "TEC mapping: K_IW = K_PW 2 pi bw / ratio")->capture_default_str();
}

LoopSet loops_from(const LoopArgs& a) {
  require_positive(a.apc_bw, "--apc-bw");
  require_positive(a.tec_bw, "--tec-bw");
  require_positive(a.zeta, "--zeta");
  require_positive(a.E, "--E");
  require_positive(a.V, "--V");
  require_positive(a.X, "--X");
  require_positive(a.tec_scale, "--tec-scale");
  require_positive(a.tec_ratio, "--tec-ratio");
  LoopCase c;
  c.apc_bw = a.apc_bw;
  c.tec_bw = a.tec_bw;
  c.zeta = a.zeta;
  c.E = a.E;
  c.V = a.V;
  c.X = a.X;
  return build_loops(c, {a.tec_scale, a.tec_ratio});
}

struct BodeArgs {
  LoopArgs loop;
  std::string kind;
  double cc_bw = 200.0;
  double H = 0.0;
  double f_nom = 60.0;
  double f_min = 0.01;
  double f_max = 1000.0;
  int points = 400;
  std::string out;
};

int run_bode(const BodeArgs& a, std::ostream& out) {
  require_path(a.out, "--out");
  require_positive(a.cc_bw, "--cc-bw");
  require_positive(a.f_min, "--fmin");
  if (!(a.f_max > a.f_min)) throw FlagError("--fmax", "must exceed --fmin");
  if (a.points < 2) throw FlagError("--points", "must be at least 2");
  const LoopSet ls = loops_from(a.loop);
  const double P_max = pmax(a.loop.E, a.loop.V, a.loop.X);

  TransferFunction tf = ls.apc_cl;
  if (a.kind == "loop") {
    tf = ls.loop_gain;
  } else if (a.kind == "tec-ff" || a.kind == "tec-noff") {
    tf = make_tec_closed_loop(ls.tec.K_PW, ls.tec.K_IW, ls.apc_cl, a.kind == "tec-ff", kTwoPi * a.cc_bw);
  } else if (a.kind == "inertial") {
    ApcGains g = ls.apc;
    if (a.H != 0.0) {
      require_positive(a.H, "--H");
      require_positive(a.f_nom, "--f-nom");
      g = apc_gains_from_inertia(a.H, 1.0, kTwoPi * a.f_nom, P_max, a.loop.zeta);
    }
    tf = make_inertial_tf(P_max, g.K_P, g.K_I);
  }
  const FrequencyResponse r = bode(tf, log_frequency_grid(a.f_min, a.f_max, a.points));
  auto os = open_out(a.out, "--out");
  write_bode_csv(os, r);
  out << fmt::format("bode {}: {} points, {:g}-{:g} Hz -> {}\n", a.kind, r.freq_hz.size(), a.f_min, a.f_max, a.out);
  return kOk;
}

struct MarginsArgs {
  LoopArgs loop;
  std::string out;
};

int run_margins(const MarginsArgs& a, std::ostream& out) {
  const LoopSet ls = loops_from(a.loop);
  const MarginReport r = margins(ls.loop_gain);
  const std::string text =
      fmt::format("apc_bw_hz: {:g}\ntec_bw_hz: {:g}\nzeta: {:g}\nK_P: {:.6g}\nK_I: {:.6g}\nK_PW: {:.6g}\nK_IW: {:.6g}\n",
                  a.loop.apc_bw, a.loop.tec_bw, a.loop.zeta, ls.apc.K_P, ls.apc.K_I, ls.tec.K_PW, ls.tec.K_IW) +
      format_margin_report(r);
  out << text;
  if (!a.out.empty()) {
    auto os = open_out(a.out, "--out");
    os << text;
  }
  return kOk;
}

// sweep

struct SweepArgs {
  std::string param;
  std::vector<double> values;
  std::string preset;
  std::string config;
  std::string out_dir;
  std::string feedforward;
  int jobs = 0;
};

struct SweepRow {
  double value = 0.0;
  RunResult result;
  double energy = std::nan("");
  double max_dfdt = std::nan("");
};

void apply_sweep_value(ScenarioConfig& cfg, const std::string& param, double v) {
  if (param == "H") {
    require_positive(v, "--values");
    cfg.design.H = v;
    cfg.design.apc_bw_hz = 0.0;  // the H mapping only applies without a bandwidth design
  } else if (param == "tec_bw") {
    require_positive(v, "--values");
    cfg.design.tec_bw_hz = v;
  } else {
    if (!(v >= 0.0)) throw FlagError("--values", "deadband must be non-negative");
    cfg.design.deadband_hz = v;
  }
  cfg.name = fmt::format("{}_{}_{:g}", cfg.name, param, v);
}

// Inertial energy and peak RoCoF over the first frequency event of the run.
void sweep_metrics(const ScenarioConfig& cfg, SweepRow& row) {
  const RunResult& r = row.result;
  if (r.status != ExitStatus::Completed) return;
  for (const Event& e : cfg.events) {
    if (e.kind != EventKind::SetGridFrequency) continue;
    double ramp = cfg.frequency_ramp_s;
    if (e.ramp_rate) ramp = *e.ramp_rate > 0.0 ? std::abs(e.value - cfg.params.grid.f_nominal) / *e.ramp_rate : 0.0;
    const double t2 = std::min(e.t + std::max(ramp, 0.1), r.log.t().back());
    if (t2 <= e.t) return;
    row.energy = inertial_energy(r.log, e.t, t2);
    const auto& t = r.log.t();
    const auto& f = r.log.channel("f_conv");
    row.max_dfdt = 0.0;
    for (std::size_t k = 1; k + 1 < t.size(); ++k) {
      if (t[k] < e.t) continue;
      row.max_dfdt = std::max(row.max_dfdt, std::abs((f[k + 1] - f[k - 1]) / (t[k + 1] - t[k - 1])));
    }
    return;
  }
}

int run_sweep(const SweepArgs& a, std::ostream& out) {
  require_path(a.out_dir, "--out");
  if (a.values.empty()) throw FlagError("--values", "needs at least one value");
  if (a.jobs < 0) throw FlagError("--jobs", "must be non-negative");
  ScenarioConfig base = load_config(a.preset, a.config);
  apply_feedforward(base, a.feedforward);

  std::vector<ScenarioConfig> cfgs;
  for (double v : a.values) {
    ScenarioConfig c = base;
    apply_sweep_value(c, a.param, v);
    try {
      c.validate();
      design_gains(c.params, c.design);
    } catch (const std::invalid_argument& ex) {
      throw FlagError("--values", ex.what());
    }
    cfgs.push_back(std::move(c));
  }

  // Independent runs fanned out over worker threads; no shared mutable state but the index.
  std::vector<SweepRow> rows(cfgs.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(a.jobs > 0 ? a.jobs : hw, cfgs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cfgs.size(); i = next++) {
        rows[i].value = a.values[i];
        rows[i].result = run_scenario(cfgs[i]);
        sweep_metrics(cfgs[i], rows[i]);
      }
    });
  }
  for (auto& t : pool) t.join();

  fs::create_directories(a.out_dir);
  auto table = open_out(fs::path(a.out_dir) / "sweep_summary.csv", "--out");
  table << a.param << ",status,trip_time_s,boost_complete_s,band_pass,inertial_energy_J,max_abs_dfdt_Hz_per_s\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& row = rows[i];
    const RunResult& r = row.result;
    write_run(a.out_dir, safe_stem(cfgs[i].name), cfgs[i], r, "--out");
    bool band = !r.bands.empty();
    for (const auto& b : r.bands) band = band && b.pass;
    const char* status = r.status == ExitStatus::Trip ? "Trip" : "Completed";
    table << fmt::format("{:g},{},{:.10g},{:.10g},{},{:.10g},{:.10g}\n", row.value, status,
                         r.status == ExitStatus::Trip ? r.trip_time : std::nan(""), r.boost_complete_time,
                         band ? 1 : 0, row.energy, row.max_dfdt);
    out << fmt::format("{}={:<8g} {:<9} band {:<4} energy {:.6g} J  max|df/dt| {:.6g} Hz/s{}\n", a.param, row.value,
                       status, band ? "pass" : "fail", row.energy, row.max_dfdt,
                       r.status == ExitStatus::Trip ? "  (" + r.trip_reason + ")" : "");
  }
  out << "wrote " << (fs::path(a.out_dir) / "sweep_summary.csv").string() << '\n';
  return kOk;
}

// verify

struct VerifyArgs {
  std::string suite = "all";
  std::string out_dir;
};

int run_verify(const VerifyArgs& a, std::ostream& out) {
  const verify::Suite suite = verify::suite_from_string(a.suite);
  verify::Options opt;
  opt.out_dir = a.out_dir;
  const auto results = verify::run_suite(suite, opt);
  verify::print_table(out, results);
  return verify::all_pass(results) ? kOk : kUsageError;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DS-MC E-STATCOM simulator and small-signal toolkit", args.empty() ? "estatcom" : args.front()};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Run a scenario (exit 2 on trip)");
  s_sim->add_option("--preset", sim.preset, "Built-in preset name");
  s_sim->add_option("--config", sim.config, "Scenario JSON file");
  s_sim->add_option("--out", sim.out_dir, "Output directory for <name>.csv and <name>_summary.txt");
  s_sim->add_option("--feedforward", sim.feedforward, "Override the TEC current feedforward")
      ->check(CLI::IsMember({"on", "off"}));
  s_sim->add_flag("--list-presets", sim.list, "Print preset names and exit");
  s_sim->add_flag("--dump-config", sim.dump, "Print the resolved scenario as JSON and exit");

  BodeArgs bd;
  auto* s_bode = app.add_subcommand("bode", "Write a Bode CSV (freq_hz,mag_db,phase_deg)");
  s_bode->add_option("--case", bd.kind, "Transfer function")
      ->required()
      ->check(CLI::IsMember({"apc", "loop", "tec-ff", "tec-noff", "inertial"}));
  add_loop_flags(s_bode, bd.loop);
  s_bode->add_option("--cc-bw", bd.cc_bw, "Current-loop bandwidth for tec-ff (Hz)")->capture_default_str();
  s_bode->add_option("--H", bd.H, "Inertia constant for the inertial case (s); default uses --apc-bw");
  s_bode->add_option("--f-nom", bd.f_nom, "Nominal frequency for the H mapping (Hz)")->capture_default_str();
  s_bode->add_option("--fmin", bd.f_min, "Lowest frequency (Hz)")->capture_default_str();
  s_bode->add_option("--fmax", bd.f_max, "Highest frequency (Hz)")->capture_default_str();
  s_bode->add_option("--points", bd.points, "Log-spaced points")->capture_default_str();
  s_bode->add_option("--out", bd.out, "Output CSV path");

  MarginsArgs mg;
  auto* s_margins = app.add_subcommand("margins", "Gain/phase margins of the TEC-APC loop gain");
  add_loop_flags(s_margins, mg.loop);
  s_margins->add_option("--out", mg.out, "Also write the report to this file");

  SweepArgs sw;
  auto* s_sweep = app.add_subcommand("sweep", "Run a scenario over parameter values in parallel");
  s_sweep->add_option("--param", sw.param, "Swept parameter")->required()->check(
      CLI::IsMember({"H", "tec_bw", "deadband"}));
  s_sweep->add_option("--values", sw.values, "Comma-separated values (s, Hz or Hz)")->required()->delimiter(',');
  s_sweep->add_option("--preset", sw.preset, "Built-in preset name");
  s_sweep->add_option("--config", sw.config, "Scenario JSON file");
  s_sweep->add_option("--out", sw.out_dir, "Output directory");
  s_sweep->add_option("--feedforward", sw.feedforward, "Override the TEC current feedforward")
      ->check(CLI::IsMember({"on", "off"}));
  s_sweep->add_option("--jobs", sw.jobs, "Worker threads (0 = hardware concurrency)");

  VerifyArgs vf;
  auto* s_verify = app.add_subcommand("verify", "Run the acceptance checks (exit 0 only if all pass)");
  s_verify->add_option("--suite", vf.suite, "Check suite")
      ->capture_default_str()
      ->check(CLI::IsMember({"smallsignal", "timedomain", "all"}));
  s_verify->add_option("--out", vf.out_dir, "Write the CSV/text artifacts of every check here");

  if (args.size() > 1 && !args[1].empty() && args[1].front() != '-' && app.get_subcommand_no_throw(args[1]) == nullptr) {
    err << "error: unknown subcommand '" << args[1] << "'\n\n" << app.help();
    return kUsageError;
  }

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  if (argv.empty()) argv.push_back("estatcom");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands()) sub = s;
    err << (sub != nullptr ? sub->help() : app.help());
    return kUsageError;
  }

  try {
    if (s_sim->parsed()) return run_simulate(sim, out);
    if (s_bode->parsed()) return run_bode(bd, out);
    if (s_margins->parsed()) return run_margins(mg, out);
    if (s_sweep->parsed()) return run_sweep(sw, out);
    if (s_verify->parsed()) return run_verify(vf, out);
  } catch (const FlagError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsageError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsageError;
  }
  err << app.help();
  return kUsageError;
}

int dispatch(int argc, char** argv) {
  return dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace estatcom::cli
