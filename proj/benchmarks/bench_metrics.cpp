#include <benchmark/benchmark.h>

#include <sstream>

#include "beamsim/metrics.hpp"
#include "beamsim/scenario.hpp"

using namespace beamsim;

namespace {

const std::vector<std::string>& sample_log() {
  static const std::vector<std::string> lines = [] {
    std::vector<std::string> out;
    std::istringstream in(run_scenario(ScenarioConfig{}).event_log);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }();
  return lines;
}

void BM_BuildLedger(benchmark::State& state) {
  const auto& lines = sample_log();
  for (auto _ : state) benchmark::DoNotOptimize(build_ledger(lines));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lines.size()));
}
BENCHMARK(BM_BuildLedger)->Unit(benchmark::kMillisecond);

void BM_MetricsSeries(benchmark::State& state) {
  const auto ledger = build_ledger(sample_log());
  for (auto _ : state) benchmark::DoNotOptimize(metrics_series(ledger, SimTime::from_seconds(1.0)));
}
BENCHMARK(BM_MetricsSeries)->Unit(benchmark::kMillisecond);

}  // namespace
