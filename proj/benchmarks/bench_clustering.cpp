#include <benchmark/benchmark.h>

#include <random>

#include "beamsim/clustering.hpp"

using namespace beamsim;

namespace {

std::vector<VehicleSnapshot> road(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(0.0, 2800.0), y(150.0, 250.0), v(20.0, 35.0), jitter(-20.0, 20.0);
  std::vector<VehicleSnapshot> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double base = (i % 2) ? 180.0 : 0.0;
    out.push_back({static_cast<VehicleIndex>(i), {x(rng), y(rng)}, v(rng), std::fmod(base + jitter(rng) + 360.0, 360.0)});
  }
  return out;
}

void BM_FormClusters(benchmark::State& state) {
  const auto snap = road(static_cast<std::size_t>(state.range(0)), 7);
  std::uint64_t next = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(form_clusters(snap, NodeId::rsu(0), FormationParams{}, SimTime{}, next));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FormClusters)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_SelectHeads(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(0.0, 5.0);
  std::vector<Candidate> members;
  for (VehicleIndex i = 0; i < static_cast<VehicleIndex>(state.range(0)); ++i) members.push_back({i, w(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(select_cluster_heads(members));
}
BENCHMARK(BM_SelectHeads)->Arg(25)->Arg(250);

}  // namespace
