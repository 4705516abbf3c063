#include <benchmark/benchmark.h>

#include "estatcom/analysis.hpp"
#include "estatcom/engine.hpp"

using namespace estatcom;

static void BM_Rk4Step(benchmark::State& st) {
  const ConverterParams p = make_preset("table2-downscale").params;
  ConverterState s;
  s.v_C.fill(p.v_arm_rated());
  s.precharge_bypassed = true;
  s.blocked = false;
  s.dc_mc_closed = true;
  ArmArray m;
  m.fill(0.5 * p.V_dc_rated / p.v_arm_rated());
  const GridSource grid(p.grid);
  double t = 0.0;
  for (auto _ : st) {
    s = rk4_step(s, m, grid, t, 20e-6, p.V_dc_rated, p).state;
    t += 20e-6;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Rk4Step);

static void BM_Margins(benchmark::State& st) {
  LoopCase c;
  c.tec_bw = static_cast<double>(st.range(0)) / 10.0;
  for (auto _ : st) benchmark::DoNotOptimize(margins(build_loops(c).loop_gain));
}
BENCHMARK(BM_Margins)->Arg(3)->Arg(100);

static void BM_Bode(benchmark::State& st) {
  const LoopSet ls = build_loops({});
  const auto grid = log_frequency_grid();
  for (auto _ : st) benchmark::DoNotOptimize(bode(ls.loop_gain, grid));
}
BENCHMARK(BM_Bode);

static void BM_BoostScenario(benchmark::State& st) {
  const ScenarioConfig cfg = make_preset("fig12b-ff");
  for (auto _ : st) benchmark::DoNotOptimize(run_scenario(cfg));
}
BENCHMARK(BM_BoostScenario)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
