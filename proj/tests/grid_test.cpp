#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/errors.hpp"
#include "carbonmkt/grid.hpp"

namespace carbonmkt {
namespace {

Network two_bus() {
  Network n;
  n.buses = {1, 2};
  n.lines = {{1, 2, 10.0, 50.0}};
  n.slack = 1;
  return n;
}

Network triangle() {
  Network n;
  n.buses = {1, 2, 3};
  n.lines = {{1, 2, 1.0, 100.0}, {1, 3, 1.0, 100.0}, {2, 3, 1.0, 100.0}};
  n.slack = 1;
  return n;
}

// Angles from the full nodal system with the slack equation replaced by
// theta_slack = 0, solved by plain Gaussian elimination.
std::vector<double> direct_dc_flows(const Network& net,
                                    const std::vector<double>& q) {
  const std::size_t n = net.buses.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (const Line& l : net.lines) {
    const auto f = net.bus_index(l.from);
    const auto t = net.bus_index(l.to);
    a[f][f] += l.susceptance;
    a[t][t] += l.susceptance;
    a[f][t] -= l.susceptance;
    a[t][f] -= l.susceptance;
  }
  for (std::size_t i = 0; i < n; ++i) a[i][n] = q[i];
  const auto s = net.bus_index(net.slack);
  std::fill(a[s].begin(), a[s].end(), 0.0);
  a[s][s] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    std::swap(a[c], a[p]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double m = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= m * a[c][k];
    }
  }
  std::vector<double> theta(n);
  for (std::size_t i = 0; i < n; ++i) theta[i] = a[i][n] / a[i][i];
  std::vector<double> flows;
  for (const Line& l : net.lines) {
    flows.push_back(l.susceptance *
                    (theta[net.bus_index(l.from)] - theta[net.bus_index(l.to)]));
  }
  return flows;
}

TEST(Ptdf, TwoBusInjectionAtNonSlackFlowsBackward) {
  const PtdfMatrix ptdf = compute_ptdf(two_bus());
  EXPECT_NEAR(ptdf(0, 1), -1.0, 1e-12);
  EXPECT_EQ(ptdf(0, 0), 0.0);
}

TEST(Ptdf, TriangleSplitsTwoThirdsOneThird) {
  const PtdfMatrix ptdf = compute_ptdf(triangle());
  EXPECT_NEAR(ptdf(0, 1), -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(ptdf(1, 1), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(ptdf(2, 1), 1.0 / 3.0, 1e-12);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(ptdf(l, 0), 0.0);
}

TEST(Ptdf, CopperPlateRejected) {
  Network n;
  n.buses = {1};
  n.slack = 1;
  n.copper_plate = true;
  EXPECT_THROW(compute_ptdf(n), InputError);
}

TEST(Ptdf, DisconnectedNetworkRejected) {
  Network n = triangle();
  n.buses.push_back(4);
  EXPECT_THROW(compute_ptdf(n), DisconnectedNetwork);
}

TEST(Ptdf, BadLinesRejected) {
  Network n = two_bus();
  n.lines[0].to = 1;
  EXPECT_THROW(n.validate(), InvariantViolation);
  n = two_bus();
  n.lines[0].susceptance = 0.0;
  EXPECT_THROW(n.validate(), InvariantViolation);
  n = two_bus();
  n.slack = 7;
  EXPECT_THROW(n.validate(), InvariantViolation);
}

TEST(LineFlows, ZeroDispatchGivesZeroFlow) {
  const PtdfMatrix ptdf = compute_ptdf(triangle());
  const std::vector<double> none;
  const std::vector<std::size_t> no_bus;
  const auto f = line_flows(ptdf, none, no_bus, none, no_bus);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(LineFlows, TwoBusConservation) {
  const PtdfMatrix ptdf = compute_ptdf(two_bus());
  const std::vector<double> p{10.0}, d{10.0};
  const std::vector<std::size_t> gb{0}, lb{1};
  const auto f = line_flows(ptdf, p, gb, d, lb);
  EXPECT_NEAR(f[0], 10.0, 1e-12);
}

TEST(LineFlows, TriangleGenAtTwoLoadAtOne) {
  const PtdfMatrix ptdf = compute_ptdf(triangle());
  const std::vector<double> p{9.0}, d{9.0};
  const std::vector<std::size_t> gb{1}, lb{0};
  const auto f = line_flows(ptdf, p, gb, d, lb);
  EXPECT_NEAR(f[0], -6.0, 1e-12);
  EXPECT_NEAR(f[1], -3.0, 1e-12);
  EXPECT_NEAR(f[2], 3.0, 1e-12);
}

TEST(LineFlows, UnbalancedRejected) {
  const PtdfMatrix ptdf = compute_ptdf(two_bus());
  const std::vector<double> p{10.0}, d{9.0};
  const std::vector<std::size_t> gb{0}, lb{1};
  EXPECT_THROW(line_flows(ptdf, p, gb, d, lb), UnbalancedInjection);
}

TEST(LineFlows, MatchDirectSolveAndSuperpose) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  RandomCaseSizes sizes;
  sizes.buses = 9;
  sizes.extra_lines = 6;
  sizes.copper_plate = false;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Network net = random_case(seed, sizes).network;
    const PtdfMatrix ptdf = compute_ptdf(net);
    const std::size_t nb = net.buses.size();
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> q1(nb), q2(nb), q12(nb);
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t b = 1; b < nb; ++b) {
        q1[b] = u(rng);
        q2[b] = u(rng);
        s1 += q1[b];
        s2 += q2[b];
      }
      q1[0] = -s1;
      q2[0] = -s2;
      for (std::size_t b = 0; b < nb; ++b) q12[b] = q1[b] + q2[b];
      const auto f1 = ptdf.flows(q1);
      const auto f2 = ptdf.flows(q2);
      const auto f12 = ptdf.flows(q12);
      const auto direct = direct_dc_flows(net, q1);
      for (std::size_t l = 0; l < net.lines.size(); ++l) {
        EXPECT_NEAR(f1[l], direct[l], 1e-9);
        EXPECT_NEAR(f12[l], f1[l] + f2[l], 1e-12 * (1.0 + std::abs(f12[l])));
      }
    }
  }
}

TEST(Ptdf, RadialEntriesBounded) {
  RandomCaseSizes sizes;
  sizes.buses = 12;
  sizes.copper_plate = false;
  const Network net = random_case(3, sizes).network;
  const PtdfMatrix ptdf = compute_ptdf(net);
  for (std::size_t l = 0; l < ptdf.lines(); ++l) {
    for (std::size_t b = 0; b < ptdf.buses(); ++b) {
      EXPECT_LE(std::abs(ptdf(l, b)), 1.0 + 1e-12);
    }
  }
}

}  // namespace
}  // namespace carbonmkt
