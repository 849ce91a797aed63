#include <string>

#include <benchmark/benchmark.h>

#include "carbonmkt/baselines.hpp"
#include "carbonmkt/case_io.hpp"
#include "carbonmkt/mechanism.hpp"
#include "carbonmkt/verification.hpp"

namespace carbonmkt {
namespace {

MarketCase data_case(const std::string& name) {
  return load_case(std::string(CARBONMKT_DATA_DIR) + "/" + name + ".case");
}

const char* kCases[] = {"simple", "congested6", "mesh30", "mesh118"};

void BM_ClearingSolve(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  const MarketClearing mc(c);
  for (auto _ : state) benchmark::DoNotOptimize(mc.solve(0.5));
}
BENCHMARK(BM_ClearingSolve)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_DeltaSearch(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  const MarketClearing mc(c);
  int solves = 0;
  for (auto _ : state) {
    const auto r = determine_delta(mc);
    solves = r.solves;
  }
  state.counters["solves"] = solves;
}
BENCHMARK(BM_DeltaSearch)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_Mechanism(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  const auto m = static_cast<Mechanism>(state.range(1));
  state.SetLabel(c.name + " " + to_string(m));
  for (auto _ : state) benchmark::DoNotOptimize(run_mechanism(c, m));
}
BENCHMARK(BM_Mechanism)
    ->ArgsProduct({{0, 1, 2, 3}, {0, 1, 2, 3}})
    ->Unit(benchmark::kMillisecond);

void BM_PropertySuite(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  const MarketOutcome o = run_proposed(c);
  for (auto _ : state) benchmark::DoNotOptimize(run_property_suite(c, o));
}
BENCHMARK(BM_PropertySuite)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace carbonmkt

BENCHMARK_MAIN();
