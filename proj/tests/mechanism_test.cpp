#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/errors.hpp"
#include "carbonmkt/mechanism.hpp"

namespace carbonmkt {
namespace {

// Hand analysis of the simple system. Merit order on c + kappa e puts
// generator 2 at the margin (0.536) with generator 3 (0.558) next and the
// cheapest load bid at 0.67. Minimum-eta prices satisfy
//   tau - eta * 0.536 = 0.480 + 0.056 delta  (generator 2 is interior),
// and nonnegative load margins require b (1 + eta) >= tau for b = 0.67, while
// generator 3 must stay out: tau - eta * 0.558 <= 0.502 + 0.056 delta.
// The binding pair gives eta = (0.032 - 0.035 delta) / 0.003 for small delta.
double analytic_eta(double delta) {
  return std::max(0.0, (0.032 - 0.035 * delta) / 0.003);
}

TEST(ClearingLp, ShapeAndObjective) {
  const MarketCase c = bundled_simple_system();
  const auto lp1 = build_market_clearing_lp(c, 1.0);
  // p 6, d 8, lambda, mu 12, phi 16
  EXPECT_EQ(lp1.num_variables(), 43u);
  // balance, 6 + 8 stationarity rows, strong duality
  EXPECT_EQ(lp1.num_constraints(), 16u);
  EXPECT_NEAR(lp1.objective[0], -0.535, 1e-15);
  EXPECT_EQ(build_market_clearing_lp(c, 0.0).objective[0], -0.472);
  EXPECT_THROW(build_market_clearing_lp(c, 1.5), InputError);
}

TEST(ClearingLp, DispatchInvariantInDelta) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const double o_star = solve_social_optimum(c).welfare;
  for (int k = 0; k <= 10; ++k) {
    const auto s = mc.solve(k / 10.0);
    EXPECT_NEAR(carbon_aware_welfare(c, s.p, s.d), o_star, 1e-7 * o_star);
    EXPECT_NEAR(s.duality_gap, 0.0, 1e-6);
    EXPECT_GE(s.eta, 0.0);
  }
}

TEST(ClearingLp, EtaFollowsHandAnalysis) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  for (double delta : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0}) {
    EXPECT_NEAR(mc.solve(delta).eta, analytic_eta(delta), 1e-9) << delta;
  }
}

TEST(ClearingLp, CarbonFreeCaseHasZeroEta) {
  MarketCase c = bundled_simple_system();
  c.carbon_price = 0.0;
  const MarketClearing mc(c);
  const double lambda = solve_social_optimum(c).lambda;
  for (double delta : {0.0, 0.4, 1.0}) {
    const auto s = mc.solve(delta);
    EXPECT_LE(s.eta, 1e-12);
    EXPECT_NEAR(s.tau, lambda, 1e-12);
  }
}

TEST(Prices, UniformWhenEtaZero) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const auto s = mc.solve(1.0);
  const auto prices = extract_prices(s, mc.model(), 1.0);
  for (double v : prices.generator) EXPECT_NEAR(v, s.tau, 1e-12);
  for (double v : prices.load) EXPECT_NEAR(v, s.tau, 1e-12);
  EXPECT_NEAR(prices.tax_rate, 0.07, 1e-15);
}

TEST(Subsidy, DeltaOneIsCarbonTaxOnly) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const auto s = mc.solve(1.0);
  const auto b = subsidy(s, mc.model(), 1.0);
  EXPECT_EQ(b.s1, 0.0);
  EXPECT_NEAR(b.s3, 0.0, 1e-9);
  EXPECT_NEAR(b.s2, -107.52, 1e-9);
}

TEST(Subsidy, DeltaZeroIsStrongDualityOnly) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const auto s = mc.solve(0.0);
  const auto b = subsidy(s, mc.model(), 0.0);
  EXPECT_GT(s.eta, 0.0);
  EXPECT_EQ(b.s2, 0.0);
  EXPECT_GE(b.s3, 0.0);
  EXPECT_NEAR(b.delta_s(), b.s3, 0.0);
}

TEST(DeltaSearch, SimpleSystemDelta) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const DeltaSearchResult r = determine_delta(mc);
  EXPECT_NEAR(r.delta_tilde, 0.92, 0.01);
  EXPECT_NEAR(r.delta_tilde, 0.032 / 0.035, 1e-7);
  // x is relative to the refined delta tilde, not the two-digit 0.92
  EXPECT_NEAR(r.x, 0.9018 / (0.032 / 0.035), 1e-3);
  EXPECT_NEAR(r.x * r.delta_tilde, r.delta, 1e-12);
  EXPECT_NEAR(r.delta, 0.9018, 1e-3);
  EXPECT_FALSE(r.eta_always_zero);
  const auto s = mc.solve(r.delta);
  const double s2 = subsidy(s, mc.model(), r.delta).s2;
  EXPECT_LE(std::abs(balance_gap(s, c)), 1e-6 * std::abs(s2));
  EXPECT_TRUE(std::is_sorted(r.trace.begin(), r.trace.end(),
                             [](const EtaPoint& a, const EtaPoint& b) {
                               return a.delta < b.delta;
                             }));
}

TEST(DeltaSearch, DeltaTildeIsLowestZeroEta) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const DeltaSearchOptions o;
  const auto tilde = find_delta_tilde(mc, o);
  ASSERT_TRUE(tilde.has_value());
  EXPECT_LE(mc.solve(*tilde).eta, o.eta_zero_tol);
  EXPECT_GT(mc.solve(*tilde - 1e-6).eta, o.eta_zero_tol);
}

TEST(DeltaSearch, SweepAndBisectionAgree) {
  RandomCaseSizes sizes;
  sizes.buses = 8;
  sizes.generators = 5;
  sizes.loads = 6;
  sizes.extra_lines = 4;
  sizes.copper_plate = false;
  RandomCaseRanges ranges;
  ranges.line_capacity = {5.0, 40.0};
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const MarketClearing mc(random_case(seed, sizes, ranges));
    DeltaSearchOptions bisect;
    DeltaSearchOptions sweep;
    sweep.descending_sweep = true;
    const auto a = find_delta_tilde(mc, bisect);
    const auto b = find_delta_tilde(mc, sweep);
    ASSERT_EQ(a.has_value(), b.has_value()) << "seed " << seed;
    if (!a) continue;
    ++compared;
    EXPECT_NEAR(*a, *b, 1e-7) << "seed " << seed;
    EXPECT_LE(mc.solve(*a).eta, bisect.eta_zero_tol);
    if (*a > 1e-6) EXPECT_GT(mc.solve(*a - 1e-6).eta, bisect.eta_zero_tol);
  }
  EXPECT_GT(compared, 0);
}

// eta0 is large here and the dual lands on eta = 0 about 5e-8 early
TEST(DeltaSearch, TildeIsZeroOfLinearPiece) {
  const MarketClearing mc(random_case(8));
  const double a = mc.solve(0.2).eta, b = mc.solve(0.6).eta;
  const double line_zero = 0.2 + a * 0.4 / (a - b);
  const auto tilde = find_delta_tilde(mc);
  ASSERT_TRUE(tilde.has_value());
  EXPECT_NEAR(*tilde, line_zero, 1e-10);
  EXPECT_EQ(mc.solve(*tilde).eta, 0.0);
}

TEST(DeltaSearch, CarbonFreeIsEtaAlwaysZero) {
  MarketCase c = bundled_simple_system();
  c.carbon_price = 0.0;
  const MarketClearing mc(c);
  EXPECT_FALSE(find_delta_tilde(mc).has_value());
  const auto r = determine_delta(mc);
  EXPECT_TRUE(r.eta_always_zero);
  EXPECT_EQ(r.delta, 1.0);
}

TEST(Mixing, LinearWhenEndpointsShareDispatch) {
  const MarketCase c = bundled_simple_system();
  const MarketClearing mc(c);
  const double tilde = 0.032 / 0.035;
  const auto q =
      solve_mixing_equation(c, tilde, mc.solve(0.0), mc.solve(tilde));
  EXPECT_NEAR(q.a, 0.0, 1e-9);
  ASSERT_EQ(q.roots.size(), 1u);
  EXPECT_NEAR(q.roots[0], -q.c / q.b, 1e-12);
}

TEST(Mixing, NoRootInUnitIntervalThrows) {
  MarketCase c;
  c.network.buses = {1};
  c.network.slack = 1;
  c.network.copper_plate = true;
  c.generators = {{"g", 1, 0.1, 1.0, 1.0}};
  c.loads = {{"l", 1, 0.5, 1.0}};
  c.carbon_price = 0.1;
  MarketClearingSolution a;
  a.p = {1.0};
  a.d = {1.0};
  // a negative eta cannot come from the solver; the lone root is then 8/7
  a.eta = -1.0;
  EXPECT_THROW(solve_mixing_equation(c, 0.5, a, a), NumericalFailure);
}

TEST(RunProposed, SimpleSystemMatchesTable) {
  const MarketCase c = bundled_simple_system();
  DeltaSearchResult search;
  const MarketOutcome o = run_proposed(c, {}, {}, &search);
  const double k = c.display_scale;
  EXPECT_NEAR(o.total_generator_revenue * k, 1421658, 0.001 * 1421658);
  EXPECT_NEAR(o.total_load_payment * k, 1324696, 0.001 * 1324696);
  EXPECT_NEAR(o.total_carbon_tax * k, 96962, 0.001 * 96962);
  EXPECT_NEAR(o.subsidy * k, 0.0, 1e-6 * k * o.total_carbon_tax);
  EXPECT_NEAR(o.welfare * k, 665830, 0.001 * 665830);
  ASSERT_TRUE(o.breakdown.has_value());
  EXPECT_NEAR(o.breakdown->total(), o.subsidy, 1e-9);
  EXPECT_FALSE(o.congested);
}

TEST(RunProposed, PriceOrderingOppositeToCost) {
  const MarketCase c = bundled_simple_system();
  const MarketOutcome o = run_proposed(c, DeltaMode::fixed(0.9018));
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      const double ca = c.generators[a].carbon_cost(0.07);
      const double cb = c.generators[b].carbon_cost(0.07);
      if (ca < cb - 1e-12) {
        EXPECT_GT(o.generator_price[a], o.generator_price[b]);
      }
    }
  }
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = 0; b < 8; ++b) {
      if (c.loads[a].utility < c.loads[b].utility) {
        EXPECT_GT(o.load_price[a], o.load_price[b]);
      }
    }
  }
}

TEST(RunProposed, FixedDeltaOneIsUniformWithSurplus) {
  const MarketCase c = bundled_simple_system();
  const MarketOutcome o = run_proposed(c, DeltaMode::fixed(1.0));
  EXPECT_NEAR(o.tax_rate, 0.07, 1e-15);
  EXPECT_NEAR(o.subsidy, o.breakdown->s2, 1e-9);
  EXPECT_LT(o.subsidy, 0.0);
  EXPECT_THROW(run_proposed(c, DeltaMode::fixed(1.2)), InputError);
}

TEST(RunProposed, SettlementIdentityOnCongestedCases) {
  RandomCaseSizes sizes;
  sizes.buses = 6;
  sizes.generators = 4;
  sizes.loads = 5;
  sizes.extra_lines = 3;
  sizes.copper_plate = false;
  RandomCaseRanges ranges;
  ranges.line_capacity = {5.0, 40.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MarketCase c = random_case(seed, sizes, ranges);
    const MarketClearing mc(c);
    for (double delta : {0.0, 0.5, 1.0}) {
      const auto s = mc.solve(delta);
      const auto o = proposed_outcome(s, mc.model());
      EXPECT_NEAR(o.breakdown->total(), o.subsidy,
                  1e-9 * std::max(1.0, std::abs(o.subsidy)));
      EXPECT_LE(o.breakdown->s1, 1e-9);
      EXPECT_LE(o.breakdown->s2, 1e-9);
      EXPECT_GE(o.breakdown->s3, -1e-9);
    }
  }
}

}  // namespace
}  // namespace carbonmkt
