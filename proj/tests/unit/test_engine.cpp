#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "estatcom/engine.hpp"

using namespace estatcom;

namespace {

WaveformLog constant_log(double value, double t_end = 1.0, int n = 101) {
  WaveformLog log;
  log.add_channel("P_ac", "W");
  for (int k = 0; k < n; ++k) {
    log.append_time(t_end * k / (n - 1));
    log.append(0, value);
  }
  return log;
}

std::string csv(const RunResult& r) {
  std::ostringstream os;
  r.log.write_csv(os);
  return os.str();
}

}  // namespace

TEST(InertialEnergy, Examples) {
  EXPECT_EQ(inertial_energy(constant_log(0.0), 0.1, 0.9), 0.0);
  EXPECT_NEAR(inertial_energy(constant_log(1e6), 0.25, 0.75), 0.5e6, 1e-6);
  EXPECT_NEAR(inertial_energy(constant_log(1e6), 0.123, 0.623), 0.5e6, 1e-6);
  EXPECT_THROW(inertial_energy(constant_log(1.0), 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(inertial_energy(constant_log(1.0), 0.5, 1.5), std::invalid_argument);
}

TEST(BandCheck, Examples) {
  BandResult b = band_check(constant_log(100.0), "P_ac", 100.0, 0.1, 0.0, 1.0);
  EXPECT_TRUE(b.pass);
  EXPECT_EQ(b.worst_excursion, 0.0);
  b = band_check(constant_log(100.0 * 1.1), "P_ac", 100.0, 0.1, 0.0, 1.0);
  EXPECT_TRUE(b.pass);
  b = band_check(constant_log(111.0), "P_ac", 100.0, 0.1, 0.0, 1.0);
  EXPECT_FALSE(b.pass);
  EXPECT_NEAR(b.worst_excursion, 0.11, 1e-12);
}

TEST(Engine, ZeroEventsZeroReferencesStayAtRest) {
  ScenarioConfig cfg = make_preset("table2-downscale");
  cfg.events.clear();
  cfg.checks.clear();
  cfg.grid_V_mag_pu = 0.0;
  cfg.setpoints.Q_ref = 0.0;
  cfg.t_end = 0.2;
  const RunResult r = run_scenario(cfg);
  ASSERT_EQ(r.status, ExitStatus::Completed);
  for (const char* ch : {"P_ac", "Q_ac", "P_dc", "P_dc_meas", "i_a", "i_b", "i_c"}) {
    for (double v : r.log.channel(ch)) ASSERT_NEAR(v, 0.0, 1e-9) << ch;
  }
}

TEST(Engine, Deterministic) {
  const ScenarioConfig cfg = make_preset("fig12b-ff");
  EXPECT_EQ(csv(run_scenario(cfg)), csv(run_scenario(cfg)));
}

TEST(Engine, StepHalvingConverges) {
  ScenarioConfig a = make_preset("fig10-scenario");
  ScenarioConfig b = a;
  b.dt_plant = a.dt_plant / 2.0;
  const RunResult ra = run_scenario(a);
  const RunResult rb = run_scenario(b);
  ASSERT_EQ(ra.status, ExitStatus::Completed);
  ASSERT_EQ(rb.status, ExitStatus::Completed);
  const auto& wa = ra.log.channel("W_total");
  const auto& wb = rb.log.channel("W_total");
  ASSERT_EQ(wa.size(), wb.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < wa.size(); ++k) worst = std::max(worst, std::abs(wa[k] - wb[k]) / a.setpoints.W_ref);
  EXPECT_LT(worst, 1e-3);
}

TEST(Engine, CsvLayout) {
  ScenarioConfig cfg = make_preset("table2-downscale");
  cfg.t_end = 0.01;
  cfg.events.clear();
  cfg.log.channels = {"P_ac", "W_total"};
  const std::string text = csv(run_scenario(cfg));
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,P_ac,W_total");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 11);  // header, t = 0 .. 10 ms
}

TEST(Engine, TripKeepsPartialLog) {
  const ScenarioConfig cfg = make_preset("fig12a-noff");
  const RunResult r = run_scenario(cfg);
  ASSERT_EQ(r.status, ExitStatus::Trip);
  EXPECT_FALSE(r.trip_reason.empty());
  EXPECT_LT(r.log.t().back(), cfg.t_end);
  EXPECT_NEAR(r.log.t().back(), r.trip_time, 2 * cfg.dt_control * cfg.log.decimation);
}

TEST(Engine, StatcomModeNeverRequestsDcPower) {
  const RunResult r = run_scenario(make_preset("fig14-statcom"));
  ASSERT_EQ(r.status, ExitStatus::Completed);
  for (double v : r.log.channel("P_dc_ref")) ASSERT_EQ(v, 0.0);
}

TEST(Engine, ValidationNamesField) {
  ScenarioConfig cfg = make_preset("fig10-scenario");
  cfg.dt_control = 1.5 * cfg.dt_plant;
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("dt_control"), std::string::npos);
  }
  cfg = make_preset("fig10-scenario");
  std::swap(cfg.events[0], cfg.events[3]);
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = make_preset("fig10-scenario");
  cfg.events.back().t = cfg.t_end + 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, JsonRoundTrip) {
  for (const std::string& name : preset_names()) {
    const ScenarioConfig a = make_preset(name);
    const ScenarioConfig b = parse_scenario(scenario_to_json(a));
    EXPECT_EQ(scenario_to_json(a), scenario_to_json(b)) << name;
  }
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_scenario(R"({"preset": "fig10-scenario", "bogus": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_scenario(R"({"preset": "fig10-scenario", "control": {"tec_bw": 1}})"), std::invalid_argument);
  EXPECT_THROW(parse_scenario("{not json"), std::invalid_argument);
}

TEST(Config, PresetOverride) {
  const ScenarioConfig c = parse_scenario(R"({"preset": "fig12a-noff", "control": {"feedforward": true}})");
  EXPECT_TRUE(c.design.feedforward);
  EXPECT_EQ(c.preset, "fig12a-noff");
}

TEST(Presets, AllValidate) {
  for (const std::string& name : preset_names()) EXPECT_NO_THROW(make_preset(name).validate()) << name;
  EXPECT_FALSE(is_preset("nope"));
  EXPECT_THROW(make_preset("nope"), std::invalid_argument);
}
