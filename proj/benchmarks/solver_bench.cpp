#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/cef.hpp"
#include "carbonmkt/grid.hpp"
#include "carbonmkt/lp.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {
namespace {

MarketCase data_case(const std::string& name) {
  return load_case(std::string(CARBONMKT_DATA_DIR) + "/" + name + ".case");
}

const char* kCases[] = {"simple", "congested6", "mesh30", "mesh118"};

// Dense random packing program with n variables and n / 2 rows.
lp::LinearProgram packing(int n) {
  std::mt19937_64 rng(static_cast<unsigned>(n));
  std::uniform_real_distribution<double> u(0.1, 1.0);
  lp::LinearProgram prog;
  for (int j = 0; j < n; ++j) {
    prog.add_variable("x" + std::to_string(j), u(rng), 0.0, 10.0);
  }
  for (int k = 0; k < n / 2; ++k) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (double& v : row) v = u(rng);
    prog.add_constraint(row, lp::Relation::kLessEqual, n * 0.5);
  }
  return prog;
}

void BM_SimplexPacking(benchmark::State& state) {
  const auto prog = packing(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lp::solve(prog));
}
BENCHMARK(BM_SimplexPacking)->RangeMultiplier(2)->Range(8, 128)
    ->Unit(benchmark::kMicrosecond);

void BM_SocialOptimum(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  const CaseModel model(c);
  for (auto _ : state) benchmark::DoNotOptimize(solve_social_optimum(model));
}
BENCHMARK(BM_SocialOptimum)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_Ptdf(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  for (auto _ : state) benchmark::DoNotOptimize(compute_ptdf(c.network));
}
BENCHMARK(BM_Ptdf)->DenseRange(2, 3)->Unit(benchmark::kMicrosecond);

void BM_NodeCarbonIntensity(benchmark::State& state) {
  const MarketCase c = data_case(kCases[state.range(0)]);
  state.SetLabel(c.name);
  const auto opt = solve_social_optimum(c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_nci(c, opt.p, opt.d, opt.flows));
  }
}
BENCHMARK(BM_NodeCarbonIntensity)->DenseRange(2, 3)
    ->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace carbonmkt

BENCHMARK_MAIN();
