#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "estatcom/controller.hpp"
#include "estatcom/plant.hpp"

namespace estatcom {

enum class EventKind {
  BypassPrecharge,
  EnableEnergyBoost,
  EnableBalancing,
  CloseDcMC,
  SetGridFrequency,
  SetQRef,
  SetMode,
  SetH,
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);
std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::BypassPrecharge;
  double value = 0.0;                  // Hz, var or s depending on kind
  Mode mode = Mode::EStatcom;          // SetMode only
  std::optional<double> ramp_rate;     // Hz/s, SetGridFrequency only
};

struct TripLimits {
  double overcurrent_pu = 1.5;     // instantaneous ac current, of I_peak_rated
  double v_C_collapse_pu = 0.5;    // of N_sm V_sm_rated
  double v_C_over_pu = 1.2;        // of N_sm V_sm_rated, always armed
  double arm_energy_fraction = 0.9;  // collapse trip armed once W_total reaches this share of W_ref
};

struct BandCheckSpec {
  std::string channel = "W_total";
  double center = 0.0;      // 0 means W_ref for W_total
  double pct = 0.1;
  double t_start = -1.0;    // < 0: from the instant the boost completes
  double t_end = -1.0;      // < 0: end of run
};

struct LogConfig {
  int decimation = 10;  // control periods per sample
  std::vector<std::string> channels;  // empty: all
};

struct ScenarioConfig {
  std::string name = "custom";
  std::string preset = "custom";
  ConverterParams params;
  ControlDesign design;
  ControlSetpoints setpoints;
  Mode mode = Mode::EStatcom;
  StorageParams storage;
  double dt_plant = 20e-6;
  double dt_control = 100e-6;
  double t_end = 1.0;
  double frequency_ramp_s = 0.5;  // default duration of frequency events
  double grid_V_mag_pu = 1.0;     // initial grid voltage magnitude
  std::vector<Event> events;
  LogConfig log;
  TripLimits trips;
  std::vector<BandCheckSpec> checks;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Channel {
  std::string name;
  std::string unit;
  std::vector<double> data;
};

class WaveformLog {
 public:
  void add_channel(const std::string& name, const std::string& unit);
  void append_time(double t) { t_.push_back(t); }
  void append(std::size_t channel, double value) { channels_[channel].data.push_back(value); }

  const std::vector<double>& t() const { return t_; }
  const std::vector<Channel>& channels() const { return channels_; }
  bool has(const std::string& name) const;
  const std::vector<double>& channel(const std::string& name) const;
  std::size_t size() const { return t_.size(); }

  /// Drops all channels not listed (keeps order of `keep`).
  void select(const std::vector<std::string>& keep);
  void write_csv(std::ostream& os) const;

 private:
  std::vector<double> t_;
  std::vector<Channel> channels_;
};

enum class ExitStatus { Completed, Trip };

struct BandResult {
  std::string channel;
  double center = 0.0;
  double pct = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  bool pass = false;
  double worst_excursion = 0.0;  // max |x - center| / |center|
  double t_worst = 0.0;
};

struct RunResult {
  WaveformLog log;
  ExitStatus status = ExitStatus::Completed;
  std::string trip_reason;
  double trip_time = 0.0;
  double boost_complete_time = -1.0;  // first instant W_total >= 0.98 W_ref
  std::vector<std::string> messages;
  std::vector<BandResult> bands;
  long saturation_samples = 0;
  long clamp_samples = 0;
  double W_ref = 0.0;
};

RunResult run_scenario(const ScenarioConfig& cfg);

/// Trapezoidal integral of P_ac over [t1, t2] with linear interpolation at the edges.
double inertial_energy(const WaveformLog& log, double t1, double t2, const std::string& channel = "P_ac");

/// Checks center (1 - pct) <= x <= center (1 + pct) on [t1, t2] (closed).
BandResult band_check(const WaveformLog& log, const std::string& channel, double center, double pct, double t1,
                      double t2);

void write_summary(std::ostream& os, const ScenarioConfig& cfg, const RunResult& result);

// Configuration files and presets.

ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
ScenarioConfig make_preset(const std::string& name);
bool is_preset(const std::string& name);

}  // namespace estatcom
