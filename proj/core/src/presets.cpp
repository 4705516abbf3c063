#include <algorithm>
#include <stdexcept>

#include "estatcom/engine.hpp"

namespace estatcom {

namespace {

ConverterParams downscale_rig() {
  ConverterParams p;
  p.grid.V_ll_rms = 110.0;
  p.grid.f_nominal = 60.0;
  p.grid.turns_ratio = 1.0;
  p.S_rated = 4e3;
  p.L_arm = 4e-3;
  p.N_sm = 5;
  p.C_arm = 5.4e-3 / p.N_sm;
  p.V_sm_rated = 50.0;
  p.V_dc_rated = 250.0;
  p.R_arm = 0.05;
  p.R_precharge = 10.0;
  const double Z = p.Z_base();
  p.grid.L_grid = 0.08 * Z / p.omega_nominal();
  p.grid.R_grid = 0.005 * Z;
  return p;
}

ConverterParams fullscale_plant() {
  ConverterParams p;
  p.grid.V_ll_rms = 132e3;
  p.grid.f_nominal = 60.0;
  p.grid.turns_ratio = 2.7;
  p.S_rated = 50e6;
  p.L_arm = 25.46e-3;
  p.N_sm = 40;
  p.C_arm = 2.65e-3 / p.N_sm;
  p.V_sm_rated = 2e3;
  p.V_dc_rated = 60e3;
  p.R_arm = 0.1;
  const double Z = p.Z_base();
  p.R_precharge = 3.0 * Z;
  p.grid.L_grid = 0.08 * Z / p.omega_nominal();
  p.grid.R_grid = 0.005 * Z;
  return p;
}

ScenarioConfig base(const std::string& name, const ConverterParams& p, double dt_plant) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.preset = name;
  cfg.params = p;
  cfg.setpoints.W_ref = p.W_rated();
  cfg.storage.E_rated = 5.0 * p.S_rated;
  cfg.storage.P_limit = 0.5 * p.S_rated;
  cfg.dt_plant = dt_plant;
  cfg.dt_control = 100e-6;
  cfg.design.apc_bw_hz = 0.0;
  cfg.design.H = 10.0;
  cfg.design.tec_bw_hz = 1.0;
  cfg.log.decimation = 10;
  cfg.checks.push_back(BandCheckSpec{});
  return cfg;
}

Event event(double t, EventKind kind, double value = 0.0) {
  Event e;
  e.t = t;
  e.kind = kind;
  e.value = value;
  return e;
}

// Pre-charge, bypass, deblock with energy boost and balancing, optional dc MC closure.
void startup(ScenarioConfig& cfg, bool close_mc, double t_mc = 0.6) {
  cfg.events.push_back(event(0.05, EventKind::BypassPrecharge));
  cfg.events.push_back(event(0.1, EventKind::EnableEnergyBoost));
  cfg.events.push_back(event(0.1, EventKind::EnableBalancing));
  if (close_mc) cfg.events.push_back(event(t_mc, EventKind::CloseDcMC));
}

Event frequency(double t, double f) { return event(t, EventKind::SetGridFrequency, f); }

Event q_ref(double t, double q) { return event(t, EventKind::SetQRef, q); }

ScenarioConfig full_sequence(const std::string& name, const ConverterParams& p, double dt_plant) {
  ScenarioConfig cfg = base(name, p, dt_plant);
  startup(cfg, true);
  cfg.events.push_back(frequency(0.8, 59.8));
  cfg.events.push_back(frequency(2.0, 60.0));
  cfg.events.push_back(q_ref(3.0, p.S_rated));
  cfg.t_end = 3.6;
  return cfg;
}

ScenarioConfig boost_only(const std::string& name, double tec_bw, bool feedforward) {
  ScenarioConfig cfg = base(name, downscale_rig(), 20e-6);
  cfg.design.apc_bw_hz = 3.0;
  cfg.design.tec_bw_hz = tec_bw;
  cfg.design.feedforward = feedforward;
  startup(cfg, false);
  cfg.t_end = 2.0;
  return cfg;
}

ScenarioConfig inertia_sweep(const std::string& name, double H) {
  ScenarioConfig cfg = base(name, downscale_rig(), 20e-6);
  cfg.design.H = H;
  startup(cfg, true);
  cfg.events.push_back(frequency(0.8, 59.8));
  cfg.t_end = 2.3;
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"table1-fullscale", "table2-downscale", "fig4-stable", "fig4-unstable", "fig10-scenario",
          "fig12a-noff",      "fig12b-ff",        "fig14-statcom", "fig14-h10",   "fig14-h20",
          "fig14-h30"};
}

bool is_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

ScenarioConfig make_preset(const std::string& name) {
  if (name == "table1-fullscale") return full_sequence(name, fullscale_plant(), 10e-6);
  if (name == "fig10-scenario") return full_sequence(name, downscale_rig(), 20e-6);
  if (name == "table2-downscale") {
    ScenarioConfig cfg = base(name, downscale_rig(), 20e-6);
    startup(cfg, true);
    cfg.events.push_back(q_ref(1.0, cfg.params.S_rated));
    cfg.t_end = 1.6;
    return cfg;
  }
  if (name == "fig4-stable") return boost_only(name, 0.3, false);
  if (name == "fig4-unstable") return boost_only(name, 10.0, false);
  if (name == "fig12a-noff") return boost_only(name, 10.0, false);
  if (name == "fig12b-ff") return boost_only(name, 10.0, true);
  if (name == "fig14-statcom") {
    // No storage: the dc MC stays open and the APC runs at its bandwidth design.
    ScenarioConfig cfg = base(name, downscale_rig(), 20e-6);
    cfg.mode = Mode::Statcom;
    cfg.design.apc_bw_hz = 3.0;
    startup(cfg, false);
    cfg.events.push_back(frequency(0.8, 59.8));
    cfg.t_end = 2.3;
    return cfg;
  }
  if (name == "fig14-h10") return inertia_sweep(name, 10.0);
  if (name == "fig14-h20") return inertia_sweep(name, 20.0);
  if (name == "fig14-h30") return inertia_sweep(name, 30.0);
  throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace estatcom
