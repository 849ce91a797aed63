#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "carbonmkt/market_case.hpp"
#include "carbonmkt/outcome.hpp"

namespace carbonmkt {

struct Witness {
  std::string agent;
  double magnitude = 0.0;
};

struct PropertyResult {
  std::string name;
  double tolerance = 0.0;
  /// empty iff the property holds
  std::vector<Witness> witnesses;

  bool passed() const { return witnesses.empty(); }
};

struct PropertyReport {
  std::string subject;
  std::vector<PropertyResult> properties;

  bool passed() const;
  /// Throws InputError when no property carries that name.
  const PropertyResult& at(const std::string& name) const;
  void append(const PropertyReport& other);
};

/// {0.8, 0.85, ..., 1.2}
std::vector<double> default_perturbation_grid();

struct VerificationOptions {
  /// budget tolerance is this times max(1, |S2|)
  double balance_rel_tol = 1e-6;
  double rationality_tol = 1e-9;
  /// relative to max(1, V) per agent and max(1, |O*|) for welfare
  double dispatch_rel_tol = 1e-7;
  double truthful_tol = 1e-7;
  double linearity_tol = 1e-6;
  std::vector<double> perturbation_grid = default_perturbation_grid();
};

/// |delta S| within tolerance, and |S| too when no line is at its limit.
PropertyReport check_budget_balance(const MarketOutcome& outcome,
                                    const VerificationOptions& opts = {});

/// Every generator's net profit and every load's net utility >= -tol.
PropertyReport check_individual_rationality(
    const MarketOutcome& outcome, const MarketCase& c,
    const VerificationOptions& opts = {});

/// Each agent, facing the posted price, earns the value of its own
/// bang-bang best response, and the realized dispatch reaches the
/// carbon-aware optimum O*. Compares values, so ties pass at any quantity.
PropertyReport check_dispatch_following(const MarketCase& c,
                                        std::span<const double> gen_price,
                                        std::span<const double> load_price,
                                        double tax_rate,
                                        std::span<const double> p,
                                        std::span<const double> d,
                                        const VerificationOptions& opts = {});
PropertyReport check_dispatch_following(const MarketCase& c,
                                        const MarketOutcome& outcome,
                                        const VerificationOptions& opts = {});

/// One agent and one bid parameter at a time: scale it by each grid factor,
/// re-solve the social program and score the agent's true profit at the
/// outcome's frozen prices. Quantities are clamped to the true capacity.
PropertyReport check_truthful_bidding(const MarketCase& c,
                                      const MarketOutcome& outcome,
                                      const VerificationOptions& opts = {});

/// eta(delta) against eta(0) (1 - delta / delta_tilde) at each sample, and
/// zero beyond delta_tilde. Throws InputError when eta(0) is already zero.
PropertyReport check_lemma_linearity(const MarketCase& c,
                                     std::span<const double> samples,
                                     const VerificationOptions& opts = {});

/// The four mechanism properties on one outcome.
PropertyReport run_property_suite(const MarketCase& c,
                                  const MarketOutcome& outcome,
                                  const VerificationOptions& opts = {});

/// Best welfare over a dispatch lattice with spacing grid_step * capacity
/// per agent; one agent at a time absorbs the balance continuously. Limited
/// to 3 generators, 3 loads and a copper plate or at most 2 lines (throws
/// TooLargeCase). Never exceeds O*.
double brute_force_welfare(const MarketCase& c, double grid_step);

/// Upper bound on O* - brute_force_welfare(c, grid_step).
double brute_force_bound(const MarketCase& c, double grid_step);

/// property,passed,tolerance,agent,magnitude; one row per witness.
void write_property_report_csv(const PropertyReport& report, std::ostream& out);
void write_property_report_json(const PropertyReport& report,
                                std::ostream& out);

}  // namespace carbonmkt
