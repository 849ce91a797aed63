#pragma once

#include "carbonmkt/market_case.hpp"
#include "carbonmkt/outcome.hpp"

namespace carbonmkt {

/// Carbon-blind dispatch priced at its LMPs, no carbon charge.
MarketOutcome run_traditional(const MarketCase& c);

/// Carbon-aware dispatch priced at its LMPs; generators pay kappa per unit
/// of emissions.
MarketOutcome run_t1(const MarketCase& c);

struct T2Options {
  int max_iterations = 200;
  /// weight of the new best response in the damped update, in (0, 1]
  double damping = 0.5;
  /// sup-norm step that ends the loop; <= 0 selects 1e-6 * max load cap
  double tolerance = 0.0;
  /// add kappa * sigma at the generator's bus to its price
  bool generator_carbon_price = false;
  /// charge generators kappa per unit of emissions
  bool generator_carbon_tax = false;

  /// Throws InputError on a damping outside (0, 1] or no iterations.
  void validate() const;
};

/// Fixed point between a cost-only OPF with fixed demand and loads that
/// best-respond to LMP + kappa * sigma. Outcomes that hit the iteration cap
/// come back with converged = false; pro-rata curtailment sets curtailed.
MarketOutcome run_t2(const MarketCase& c, const T2Options& opts = {});

/// Dispatches to the mechanism's runner; the proposed mechanism uses the
/// automatic delta.
MarketOutcome run_mechanism(const MarketCase& c, Mechanism m,
                            const T2Options& t2 = {});

}  // namespace carbonmkt
