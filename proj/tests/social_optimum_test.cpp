#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/errors.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {
namespace {

// Copper-plate merit order: cheapest supply meets highest-value demand while
// the bid exceeds the offer. Returns the optimal welfare.
double merit_order_welfare(const MarketCase& c, double carbon_weight) {
  struct Step {
    double price;
    double qty;
  };
  std::vector<Step> supply, demand;
  for (const auto& g : c.generators) {
    supply.push_back({g.carbon_cost(carbon_weight * c.carbon_price),
                      g.capacity});
  }
  for (const auto& d : c.loads) demand.push_back({d.utility, d.capacity});
  std::sort(supply.begin(), supply.end(),
            [](auto a, auto b) { return a.price < b.price; });
  std::sort(demand.begin(), demand.end(),
            [](auto a, auto b) { return a.price > b.price; });
  double w = 0.0;
  std::size_t i = 0, j = 0;
  while (i < supply.size() && j < demand.size() &&
         demand[j].price > supply[i].price) {
    const double q = std::min(supply[i].qty, demand[j].qty);
    w += q * (demand[j].price - supply[i].price);
    supply[i].qty -= q;
    demand[j].qty -= q;
    if (supply[i].qty <= 0.0) ++i;
    if (demand[j].qty <= 0.0) ++j;
  }
  return w;
}

MarketCase two_bus_congested() {
  MarketCase c;
  c.name = "two-bus";
  c.network.buses = {1, 2};
  c.network.lines = {{1, 2, 10.0, 5.0}};
  c.network.slack = 1;
  c.generators = {{"cheap", 1, 0.2, 0.0, 100.0}, {"local", 2, 0.5, 0.0, 100.0}};
  c.loads = {{"city", 2, 1.0, 10.0}};
  return c;
}

TEST(SocialLp, ShapeAndCoefficients) {
  const MarketCase c = bundled_simple_system();
  const auto lp1 = build_social_lp(c, 1.0);
  EXPECT_EQ(lp1.num_variables(), 14u);
  EXPECT_EQ(lp1.num_constraints(), 1u);
  EXPECT_EQ(lp1.constraints[0].relation, lp::Relation::kEqual);
  EXPECT_NEAR(lp1.objective[0], -0.535, 1e-15);
  const auto lp0 = build_social_lp(c, 0.0);
  EXPECT_EQ(lp0.objective[0], -0.472);

  MarketCase clean = c;
  clean.carbon_price = 0.0;
  EXPECT_EQ(build_social_lp(clean, 1.0).objective,
            build_social_lp(clean, 0.0).objective);
}

TEST(SocialOptimum, SimpleSystemMeritOrder) {
  const MarketCase c = bundled_simple_system();
  const auto s = solve_social_optimum(c);
  const std::vector<double> p{800, 620, 0, 550, 300, 400};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(s.p[i], p[i], 1e-7);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_NEAR(s.d[j], c.loads[j].capacity, 1e-7);
  }
  EXPECT_NEAR(s.welfare, 665.83, 1e-7);
  EXPECT_NEAR(s.welfare, merit_order_welfare(c, 1.0), 1e-9);
  EXPECT_NEAR(s.lambda, 0.536, 1e-12);
}

TEST(SocialOptimum, CarbonBlindDispatchIsWorseForCarbonAwareObjective) {
  const MarketCase c = bundled_simple_system();
  const auto s = solve_social_optimum(c, 0.0);
  const std::vector<double> p{800, 800, 220, 550, 300, 0};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(s.p[i], p[i], 1e-7);
  EXPECT_NEAR(carbon_aware_welfare(c, s.p, s.d), 659.79, 1e-7);
  EXPECT_LT(carbon_aware_welfare(c, s.p, s.d), 665.83);
}

TEST(SocialOptimum, NoProfitableTrade) {
  MarketCase c = bundled_simple_system();
  for (auto& d : c.loads) d.utility = 0.3;
  const auto s = solve_social_optimum(c);
  for (double v : s.p) EXPECT_EQ(v, 0.0);
  for (double v : s.d) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.welfare, 0.0);
}

TEST(SocialOptimum, DualsSatisfyStationarity) {
  RandomCaseSizes sizes;
  sizes.buses = 6;
  sizes.generators = 5;
  sizes.loads = 6;
  sizes.extra_lines = 3;
  sizes.copper_plate = false;
  RandomCaseRanges ranges;
  ranges.line_capacity = {5.0, 40.0};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const MarketCase c = random_case(seed, sizes, ranges);
    const CaseModel m(c);
    const auto s = solve_social_optimum(m);
    EXPECT_LE(max_primal_violation(m, s.p, s.d), 1e-7);
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < s.p.size(); ++i) {
      const auto& g = c.generators[i];
      double cong = 0.0;
      for (std::size_t l : m.monitored()) {
        cong += m.factor(l, m.generator_bus()[i]) * (s.chi_lo[l] - s.chi_up[l]);
      }
      EXPECT_NEAR(-s.lambda - s.mu_lo[i] + s.mu_up[i] - cong,
                  -g.carbon_cost(c.carbon_price), 1e-7);
      EXPECT_LE(s.mu_up[i] * (g.capacity - s.p[i]), 1e-7);
      EXPECT_LE(s.mu_lo[i] * s.p[i], 1e-7);
      dual_obj += s.mu_up[i] * g.capacity;
    }
    for (std::size_t j = 0; j < s.d.size(); ++j) {
      const auto& d = c.loads[j];
      double cong = 0.0;
      for (std::size_t l : m.monitored()) {
        cong += m.factor(l, m.load_bus()[j]) * (s.chi_lo[l] - s.chi_up[l]);
      }
      EXPECT_NEAR(s.lambda - s.phi_lo[j] + s.phi_up[j] + cong, d.utility,
                  1e-7);
      dual_obj += s.phi_up[j] * d.capacity;
    }
    for (std::size_t l : m.monitored()) {
      dual_obj += (s.chi_lo[l] + s.chi_up[l]) * c.network.lines[l].capacity;
    }
    EXPECT_NEAR(dual_obj, s.welfare, 1e-7 * std::max(1.0, s.welfare));
  }
}

TEST(TraditionalLmp, SimpleSystemUniformAtMarginalCost) {
  const auto lmp = traditional_lmp(bundled_simple_system());
  ASSERT_EQ(lmp.size(), 1u);
  EXPECT_NEAR(lmp[0], 0.502, 1e-12);
}

TEST(TraditionalLmp, CongestedTwoBusSplits) {
  const MarketCase c = two_bus_congested();
  const auto lmp = traditional_lmp(c);
  EXPECT_NEAR(lmp[0], 0.2, 1e-12);
  EXPECT_NEAR(lmp[1], 0.5, 1e-12);
  const auto s = solve_social_optimum(c);
  EXPECT_NEAR(s.p[0], 5.0, 1e-9);
  EXPECT_NEAR(s.p[1], 5.0, 1e-9);
  EXPECT_NEAR(s.chi_up[0], 0.3, 1e-12);
}

TEST(TraditionalLmp, SingleMarginalGenerator) {
  MarketCase c = bundled_simple_system();
  c.generators.resize(1);
  c.generators[0].capacity = 5000.0;
  const auto lmp = traditional_lmp(c);
  EXPECT_NEAR(lmp[0], 0.472, 1e-12);
}

TEST(SocialOptimum, WelfareMonotoneInLineCapacity) {
  RandomCaseSizes sizes;
  sizes.buses = 8;
  sizes.generators = 6;
  sizes.loads = 8;
  sizes.extra_lines = 4;
  sizes.copper_plate = false;
  RandomCaseRanges ranges;
  ranges.line_capacity = {5.0, 30.0};
  const MarketCase c = random_case(5, sizes, ranges);
  double prev = -1.0;
  for (double f = 0.8; f <= 1.3 + 1e-9; f += 0.1) {
    const double w = solve_social_optimum(scale_line_capacities(c, f)).welfare;
    EXPECT_GE(w, prev - 1e-9);
    prev = w;
  }
}

}  // namespace
}  // namespace carbonmkt
