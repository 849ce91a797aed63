#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "carbonmkt/lp.hpp"

namespace carbonmkt::lp::oracle {

// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    if (std::abs(a[p][c]) < 1e-10) return false;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

// Brute force over every choice of n active hyperplanes (rows and bounds).
// Requires finite bounds so the feasible region is a polytope.
struct VertexResult {
  bool feasible = false;
  double best = 0.0;
};

inline VertexResult enumerate_vertices(const LinearProgram& lp) {
  const std::size_t n = lp.num_variables();
  std::vector<std::vector<double>> planes;
  std::vector<double> rhs;
  for (const auto& row : lp.constraints) {
    planes.push_back(row.coefficients);
    rhs.push_back(row.rhs);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    planes.push_back(e);
    rhs.push_back(lp.lower[j]);
    planes.push_back(e);
    rhs.push_back(lp.upper[j]);
  }
  const std::size_t h = planes.size();
  VertexResult out;
  // iterate all n-subsets of h
  std::vector<bool> mask(h, false);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(n), true);
  do {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (std::size_t k = 0; k < h; ++k) {
      if (mask[k]) {
        a.push_back(planes[k]);
        b.push_back(rhs[k]);
      }
    }
    std::vector<double> x;
    if (!solve_square(a, b, x)) continue;
    if (max_violation(lp, x) > 1e-9) continue;
    const double obj = evaluate(lp.objective, x);
    const bool better = lp.sense == Sense::kMaximize ? obj > out.best
                                                     : obj < out.best;
    if (!out.feasible || better) out.best = obj;
    out.feasible = true;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

inline LinearProgram random_lp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvar(1, 5), ncon(1, 5), rel(0, 2),
      sense(0, 1);
  std::uniform_real_distribution<double> coef(-5.0, 5.0), ub(0.5, 10.0),
      rhs(-4.0, 12.0);
  LinearProgram lp;
  lp.sense = sense(rng) == 0 ? Sense::kMaximize : Sense::kMinimize;
  const int n = nvar(rng);
  for (int j = 0; j < n; ++j) {
    lp.add_variable("x" + std::to_string(j), coef(rng), 0.0, ub(rng));
  }
  const int m = ncon(rng);
  for (int k = 0; k < m; ++k) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = std::round(coef(rng) * 4.0) / 4.0;
    lp.add_constraint(a, static_cast<Relation>(rel(rng)), rhs(rng));
  }
  return lp;
}

}  // namespace carbonmkt::lp::oracle
