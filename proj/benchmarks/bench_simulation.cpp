#include <benchmark/benchmark.h>

#include "beamsim/scenario.hpp"

using namespace beamsim;

namespace {

// Full default scenario; arg 0 is beam, 1 is mybeam.
void BM_RunScenario(benchmark::State& state) {
  ScenarioConfig c;
  c.protocol = state.range(0) ? Protocol::MyBeam : Protocol::Beam;
  c.horizon = static_cast<double>(state.range(1));
  for (auto _ : state) {
    c.seed++;
    benchmark::DoNotOptimize(run_scenario(c));
  }
}
BENCHMARK(BM_RunScenario)->Args({0, 500})->Args({1, 500})->Unit(benchmark::kMillisecond);

void BM_ParseConfig(benchmark::State& state) {
  const std::string text = serialize(ScenarioConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(parse_config_text(text));
}
BENCHMARK(BM_ParseConfig);

}  // namespace
