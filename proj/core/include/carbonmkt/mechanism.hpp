#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "carbonmkt/lp.hpp"
#include "carbonmkt/market_case.hpp"
#include "carbonmkt/outcome.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {

/// Optimum of the primal-dual embedded clearing program at one delta.
///
/// The embedded multipliers (lambda, mu, phi, chi) are decision variables of
/// the clearing program; tau, alpha and eta are its own multipliers, chosen
/// with the smallest eta. Line vectors are indexed like network.lines.
struct MarketClearingSolution {
  double delta = 0.0;
  std::vector<double> p;
  std::vector<double> d;

  double lambda = 0.0;
  std::vector<double> mu_lo, mu_up;
  std::vector<double> phi_lo, phi_up;
  std::vector<double> chi_lo, chi_up;

  double tau = 0.0;
  std::vector<double> alpha_lo, alpha_up;
  double eta = 0.0;

  /// clearing objective sum b d - sum (c + delta kappa e) p
  double objective = 0.0;
  /// dual minus primal objective of the embedded program (0 at optimality)
  double duality_gap = 0.0;
  std::vector<double> flows;
  int iterations = 0;
};

struct PriceSchedule {
  std::vector<double> generator;
  std::vector<double> load;
  double tax_rate = 0.0;
};

/// Variable blocks p, d, lambda, mu_lo, mu_up, phi_lo, phi_up, chi_lo,
/// chi_up (line blocks over monitored lines). Rows: balance, line limits
/// (flow <= F then -flow <= F per monitored line), generator stationarity,
/// load stationarity, strong duality.
lp::LinearProgram build_market_clearing_lp(const MarketCase& c, double delta);

/// Reusable clearing model: the program and its dual are built once and only
/// the carbon term of the objective changes with delta.
class MarketClearing {
 public:
  explicit MarketClearing(const MarketCase& c);

  const CaseModel& model() const { return model_; }
  const MarketCase& market() const { return model_.market(); }
  const lp::LinearProgram& program() const { return clearing_; }

  /// Throws InputError for delta outside [0, 1], SolverError on failure.
  MarketClearingSolution solve(double delta) const;

 private:
  CaseModel model_;
  lp::LinearProgram clearing_;
  lp::DualProgram dual_;
  std::size_t sd_row_ = 0;
};

MarketClearingSolution solve_market_clearing(const MarketCase& c, double delta);

PriceSchedule extract_prices(const MarketClearingSolution& sol,
                             const CaseModel& model, double delta);

SubsidyBreakdown subsidy(const MarketClearingSolution& sol,
                         const CaseModel& model, double delta);

struct DeltaSearchOptions {
  double coarse_step = 0.01;
  /// walk the coarse grid down from 1 instead of bisecting it
  bool descending_sweep = false;
  /// bisection stops once the bracket is this narrow
  double refine_tol = 1e-10;
  double eta_zero_tol = 1e-7;
  /// Largest drop of eta to zero, relative to max(1, eta at 0), that is read
  /// as solver tolerance rather than a kink. The zero of the linear piece is
  /// returned in that case.
  double snap_rel_tol = 1e-6;
  /// relative to max(1, |S2|)
  double balance_rel_tol = 1e-6;
  int max_polish_iterations = 100;
};

struct EtaPoint {
  double delta = 0.0;
  double eta = 0.0;
  double delta_s = 0.0;
};

struct DeltaSearchResult {
  double delta_tilde = 1.0;
  double x = 1.0;
  double delta = 1.0;
  /// eta vanishes already at delta = 0
  bool eta_always_zero = false;
  /// eta_always_zero with nonzero emission cost: delta = 0 balances by itself
  bool no_balancing_needed = false;
  /// the quadratic root failed the direct check and was refined numerically
  bool polished = false;
  /// every evaluated point, ascending in delta
  std::vector<EtaPoint> trace;
  int solves = 0;
};

/// S2 + S3 at the solution.
double balance_gap(const MarketClearingSolution& sol, const MarketCase& c);

/// Lowest delta with eta = 0: a coarse grid bracket, then linear steps
/// confirmed by bracketing with bisection as the fallback. Empty when eta is
/// already zero at delta = 0.
std::optional<double> find_delta_tilde(const MarketClearing& mc,
                                       const DeltaSearchOptions& opts = {},
                                       std::vector<EtaPoint>* trace = nullptr);

/// Root in [0, 1] of a x^2 + b x + c built from the two endpoint solutions.
/// Throws NumericalFailure when no root lies in the unit interval. When both
/// do, the smaller is returned first in `roots`.
struct MixingEquation {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::vector<double> roots;
};
MixingEquation solve_mixing_equation(const MarketCase& c, double delta_tilde,
                                     const MarketClearingSolution& at_zero,
                                     const MarketClearingSolution& at_tilde);

DeltaSearchResult determine_delta(const MarketClearing& mc,
                                  const DeltaSearchOptions& opts = {});

struct DeltaMode {
  bool automatic = true;
  double value = 1.0;

  static DeltaMode fixed(double v) { return {false, v}; }
};

/// Clears the proposed mechanism at a delta chosen by `mode`.
MarketOutcome run_proposed(const MarketCase& c, DeltaMode mode = {},
                           const DeltaSearchOptions& opts = {},
                           DeltaSearchResult* search = nullptr);

/// Outcome at an already solved clearing point.
MarketOutcome proposed_outcome(const MarketClearingSolution& sol,
                               const CaseModel& model);

/// True when a monitored line runs at its limit.
bool any_line_at_limit(const CaseModel& model, std::span<const double> flows,
                       double tol = 1e-7);

}  // namespace carbonmkt
