#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "estatcom/engine.hpp"

namespace estatcom {

namespace {

using nlohmann::json;

// Reads optional keys from one JSON object and rejects keys it does not know.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + " must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw std::invalid_argument("unknown key " + path_ + "." + item.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_converter(const json& j, ConverterParams& p) {
  Section s(j, "converter");
  double C_sm = p.C_sm();
  s.get("R_arm_ohm", p.R_arm);
  s.get("L_arm_H", p.L_arm);
  s.get("C_sm_F", C_sm);
  s.get("N_sm", p.N_sm);
  s.get("V_sm_V", p.V_sm_rated);
  s.get("V_dc_V", p.V_dc_rated);
  s.get("R_precharge_ohm", p.R_precharge);
  s.get("S_rated_VA", p.S_rated);
  s.get("m_max", p.m_max);
  s.get("blocked_current_scale_A", p.blocked_current_scale);
  s.finish();
  if (p.N_sm <= 0) throw std::invalid_argument("converter.N_sm must be positive");
  p.C_arm = C_sm / p.N_sm;
}

void read_grid(const json& j, ScenarioConfig& cfg) {
  GridParams& g = cfg.params.grid;
  Section s(j, "grid");
  s.get("V_mag_pu", cfg.grid_V_mag_pu);
  s.get("V_ll_rms_V", g.V_ll_rms);
  s.get("f_nominal_Hz", g.f_nominal);
  s.get("L_grid_H", g.L_grid);
  s.get("R_grid_ohm", g.R_grid);
  s.get("turns_ratio", g.turns_ratio);
  s.finish();
}

void read_control(const json& j, ScenarioConfig& cfg) {
  Section s(j, "control");
  ControlDesign& d = cfg.design;
  std::string mode = to_string(cfg.mode);
  s.get("mode", mode);
  cfg.mode = mode_from_string(mode);
  s.get("apc_bw_Hz", d.apc_bw_hz);
  s.get("H_s", d.H);
  s.get("zeta", d.zeta);
  s.get("tec_bw_Hz", d.tec_bw_hz);
  s.get("tec_scale", d.tec_mapping.scale);
  s.get("tec_ratio", d.tec_mapping.ratio);
  s.get("P_tec_max_pu", d.P_tec_max_pu);
  s.get("rpc_bw_Hz", d.rpc_bw_hz);
  s.get("E_max_pu", d.E_max_pu);
  s.get("cc_bw_Hz", d.cc_bw_hz);
  s.get("R_v_pu", d.R_v_pu);
  s.get("L_v_pu", d.L_v_pu);
  s.get("I_max_pu", d.I_max_pu);
  s.get("circ_bw_Hz", d.circ_bw_hz);
  s.get("v_corr_max_pu", d.v_corr_max_pu);
  s.get("bal_leg_bw_Hz", d.bal_leg_bw_hz);
  s.get("bal_arm_bw_Hz", d.bal_arm_bw_hz);
  s.get("soc_kp_pu", d.soc_kp_pu);
  s.get("soc_ki_pu_per_s", d.soc_ki_pu);
  s.get("deadband_Hz", d.deadband_hz);
  s.get("v_d_min_pu", d.v_d_min_pu);
  s.get("feedforward", d.feedforward);
  s.get("zero_sequence_injection", d.zero_sequence_injection);
  s.get("v_dc_ramp_pu_per_s", d.v_dc_ramp_pu_per_s);
  s.get("W_ref_ramp_pu", d.W_ref_ramp_pu);
  s.finish();
}

void read_setpoints(const json& j, ControlSetpoints& sp) {
  Section s(j, "setpoints");
  s.get("W_ref_J", sp.W_ref);
  s.get("Q_ref_var", sp.Q_ref);
  s.get("soc_ref", sp.soc_ref);
  s.get("P_ref_ext_W", sp.P_ref_ext);
  s.finish();
}

void read_storage(const json& j, StorageParams& st) {
  Section s(j, "storage");
  s.get("E_rated_J", st.E_rated);
  s.get("P_limit_W", st.P_limit);
  s.get("tau_s", st.tau);
  s.get("soc_min", st.soc_min);
  s.get("soc_max", st.soc_max);
  s.get("soc_initial", st.soc_initial);
  s.finish();
}

void read_solver(const json& j, ScenarioConfig& cfg) {
  Section s(j, "solver");
  s.get("dt_plant_s", cfg.dt_plant);
  s.get("dt_control_s", cfg.dt_control);
  s.get("t_end_s", cfg.t_end);
  s.get("frequency_ramp_s", cfg.frequency_ramp_s);
  s.finish();
}

Event read_event(const json& j, std::size_t i) {
  const std::string path = "events[" + std::to_string(i) + "]";
  Section s(j, path);
  Event e;
  std::string kind;
  s.get("t_s", e.t);
  s.get("kind", kind);
  if (kind.empty()) throw std::invalid_argument(path + ".kind is required");
  e.kind = event_kind_from_string(kind);
  switch (e.kind) {
    case EventKind::SetGridFrequency: {
      s.get("f_Hz", e.value);
      double rate = -1.0;
      s.get("ramp_rate_Hz_per_s", rate);
      if (rate >= 0.0) e.ramp_rate = rate;
      break;
    }
    case EventKind::SetQRef: s.get("Q_var", e.value); break;
    case EventKind::SetH: s.get("H_s", e.value); break;
    case EventKind::SetMode: {
      std::string mode;
      s.get("mode", mode);
      e.mode = mode_from_string(mode);
      break;
    }
    default: break;
  }
  s.finish();
  return e;
}

void read_log(const json& j, LogConfig& log) {
  Section s(j, "log");
  s.get("decimation", log.decimation);
  s.get("channels", log.channels);
  s.finish();
}

void read_trips(const json& j, TripLimits& t) {
  Section s(j, "trips");
  s.get("overcurrent_pu", t.overcurrent_pu);
  s.get("v_C_collapse_pu", t.v_C_collapse_pu);
  s.get("v_C_over_pu", t.v_C_over_pu);
  s.get("arm_energy_fraction", t.arm_energy_fraction);
  s.finish();
}

BandCheckSpec read_check(const json& j, std::size_t i) {
  Section s(j, "checks[" + std::to_string(i) + "]");
  BandCheckSpec c;
  s.get("channel", c.channel);
  s.get("center", c.center);
  s.get("pct", c.pct);
  s.get("t_start_s", c.t_start);
  s.get("t_end_s", c.t_end);
  s.finish();
  return c;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  Section root(j, "config");
  std::string preset = "custom";
  root.get("preset", preset);
  ScenarioConfig cfg = preset == "custom" ? ScenarioConfig{} : make_preset(preset);
  cfg.preset = preset;
  root.get("name", cfg.name);
  if (const json* c = root.child("converter")) read_converter(*c, cfg.params);
  if (const json* c = root.child("grid")) read_grid(*c, cfg);
  if (const json* c = root.child("control")) read_control(*c, cfg);
  if (const json* c = root.child("setpoints")) read_setpoints(*c, cfg.setpoints);
  if (const json* c = root.child("storage")) read_storage(*c, cfg.storage);
  if (const json* c = root.child("solver")) read_solver(*c, cfg);
  if (const json* c = root.child("events")) {
    if (!c->is_array()) throw std::invalid_argument("events must be an array");
    cfg.events.clear();
    for (std::size_t i = 0; i < c->size(); ++i) cfg.events.push_back(read_event((*c)[i], i));
  }
  if (const json* c = root.child("log")) read_log(*c, cfg.log);
  if (const json* c = root.child("trips")) read_trips(*c, cfg.trips);
  if (const json* c = root.child("checks")) {
    if (!c->is_array()) throw std::invalid_argument("checks must be an array");
    cfg.checks.clear();
    for (std::size_t i = 0; i < c->size(); ++i) cfg.checks.push_back(read_check((*c)[i], i));
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  const ConverterParams& p = cfg.params;
  const ControlDesign& d = cfg.design;
  json j;
  j["name"] = cfg.name;
  j["converter"] = {{"R_arm_ohm", p.R_arm},     {"L_arm_H", p.L_arm},
                    {"C_sm_F", p.C_sm()},        {"N_sm", p.N_sm},
                    {"V_sm_V", p.V_sm_rated},    {"V_dc_V", p.V_dc_rated},
                    {"R_precharge_ohm", p.R_precharge}, {"S_rated_VA", p.S_rated},
                    {"m_max", p.m_max},          {"blocked_current_scale_A", p.blocked_current_scale}};
  j["grid"] = {{"V_ll_rms_V", p.grid.V_ll_rms}, {"f_nominal_Hz", p.grid.f_nominal}, {"L_grid_H", p.grid.L_grid},
               {"R_grid_ohm", p.grid.R_grid},   {"turns_ratio", p.grid.turns_ratio},
               {"V_mag_pu", cfg.grid_V_mag_pu}};
  j["control"] = {{"mode", to_string(cfg.mode)},
                  {"apc_bw_Hz", d.apc_bw_hz},
                  {"H_s", d.H},
                  {"zeta", d.zeta},
                  {"tec_bw_Hz", d.tec_bw_hz},
                  {"tec_scale", d.tec_mapping.scale},
                  {"tec_ratio", d.tec_mapping.ratio},
                  {"P_tec_max_pu", d.P_tec_max_pu},
                  {"rpc_bw_Hz", d.rpc_bw_hz},
                  {"E_max_pu", d.E_max_pu},
                  {"cc_bw_Hz", d.cc_bw_hz},
                  {"R_v_pu", d.R_v_pu},
                  {"L_v_pu", d.L_v_pu},
                  {"I_max_pu", d.I_max_pu},
                  {"circ_bw_Hz", d.circ_bw_hz},
                  {"v_corr_max_pu", d.v_corr_max_pu},
                  {"bal_leg_bw_Hz", d.bal_leg_bw_hz},
                  {"bal_arm_bw_Hz", d.bal_arm_bw_hz},
                  {"soc_kp_pu", d.soc_kp_pu},
                  {"soc_ki_pu_per_s", d.soc_ki_pu},
                  {"deadband_Hz", d.deadband_hz},
                  {"v_d_min_pu", d.v_d_min_pu},
                  {"feedforward", d.feedforward},
                  {"zero_sequence_injection", d.zero_sequence_injection},
                  {"v_dc_ramp_pu_per_s", d.v_dc_ramp_pu_per_s},
                  {"W_ref_ramp_pu", d.W_ref_ramp_pu}};
  j["setpoints"] = {{"W_ref_J", cfg.setpoints.W_ref},
                    {"Q_ref_var", cfg.setpoints.Q_ref},
                    {"soc_ref", cfg.setpoints.soc_ref},
                    {"P_ref_ext_W", cfg.setpoints.P_ref_ext}};
  j["storage"] = {{"E_rated_J", cfg.storage.E_rated}, {"P_limit_W", cfg.storage.P_limit},
                  {"tau_s", cfg.storage.tau},         {"soc_min", cfg.storage.soc_min},
                  {"soc_max", cfg.storage.soc_max},   {"soc_initial", cfg.storage.soc_initial}};
  j["solver"] = {{"dt_plant_s", cfg.dt_plant},
                 {"dt_control_s", cfg.dt_control},
                 {"t_end_s", cfg.t_end},
                 {"frequency_ramp_s", cfg.frequency_ramp_s}};
  json events = json::array();
  for (const Event& e : cfg.events) {
    json ev = {{"t_s", e.t}, {"kind", to_string(e.kind)}};
    if (e.kind == EventKind::SetGridFrequency) {
      ev["f_Hz"] = e.value;
      if (e.ramp_rate) ev["ramp_rate_Hz_per_s"] = *e.ramp_rate;
    } else if (e.kind == EventKind::SetQRef) {
      ev["Q_var"] = e.value;
    } else if (e.kind == EventKind::SetH) {
      ev["H_s"] = e.value;
    } else if (e.kind == EventKind::SetMode) {
      ev["mode"] = to_string(e.mode);
    }
    events.push_back(ev);
  }
  j["events"] = events;
  j["log"] = {{"decimation", cfg.log.decimation}, {"channels", cfg.log.channels}};
  j["trips"] = {{"overcurrent_pu", cfg.trips.overcurrent_pu},
                {"v_C_collapse_pu", cfg.trips.v_C_collapse_pu},
                {"v_C_over_pu", cfg.trips.v_C_over_pu},
                {"arm_energy_fraction", cfg.trips.arm_energy_fraction}};
  json checks = json::array();
  for (const BandCheckSpec& c : cfg.checks) {
    checks.push_back({{"channel", c.channel},
                      {"center", c.center},
                      {"pct", c.pct},
                      {"t_start_s", c.t_start},
                      {"t_end_s", c.t_end}});
  }
  j["checks"] = checks;
  return j.dump(2);
}

}  // namespace estatcom
