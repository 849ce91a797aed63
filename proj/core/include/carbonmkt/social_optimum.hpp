#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "carbonmkt/grid.hpp"
#include "carbonmkt/lp.hpp"
#include "carbonmkt/market_case.hpp"

namespace carbonmkt {

/// Network data every clearing model needs: PTDF, siting and the monitored
/// line set. Copper-plate cases have no monitored lines and no PTDF.
class CaseModel {
 public:
  explicit CaseModel(const MarketCase& c);

  const MarketCase& market() const { return case_; }
  std::size_t num_generators() const { return case_.generators.size(); }
  std::size_t num_loads() const { return case_.loads.size(); }
  std::size_t num_buses() const { return case_.network.buses.size(); }
  /// indices into network.lines of lines with a finite limit
  const std::vector<std::size_t>& monitored() const { return monitored_; }
  const std::vector<std::size_t>& generator_bus() const { return gen_bus_; }
  const std::vector<std::size_t>& load_bus() const { return load_bus_; }
  bool copper_plate() const { return case_.network.copper_plate; }

  /// pi_nl for bus position n and line index l (0 on copper plate)
  double factor(std::size_t line, std::size_t bus) const;
  /// Flow on every line of network.lines; empty on copper plate.
  std::vector<double> flows(std::span<const double> p,
                            std::span<const double> d) const;
  /// lambda + sum_l pi_nl (lo_l - up_l) over monitored lines, per bus.
  std::vector<double> nodal_prices(double lambda, std::span<const double> lo,
                                   std::span<const double> up) const;

 private:
  MarketCase case_;
  PtdfMatrix ptdf_;
  std::vector<std::size_t> monitored_;
  std::vector<std::size_t> gen_bus_;
  std::vector<std::size_t> load_bus_;
};

/// Carbon-aware optimum. Line multipliers are indexed like network.lines and
/// are zero on unmonitored lines. `chi_lo` belongs to the -F <= flow limit and
/// `chi_up` to flow <= F.
struct SocialOptimumSolution {
  std::vector<double> p;
  std::vector<double> d;
  double lambda = 0.0;
  std::vector<double> mu_lo, mu_up;
  std::vector<double> phi_lo, phi_up;
  std::vector<double> chi_lo, chi_up;
  std::vector<double> flows;
  /// objective value of the solved program (carbon term weighted)
  double welfare = 0.0;
  int iterations = 0;
};

/// Variables p then d; rows: balance sum d - sum p = 0, then for each
/// monitored line flow <= F followed by -flow <= F.
lp::LinearProgram build_social_lp(const MarketCase& c, double carbon_weight);
lp::LinearProgram build_social_lp(const CaseModel& model,
                                  double carbon_weight);

SocialOptimumSolution solve_social_optimum(const MarketCase& c,
                                           double carbon_weight = 1.0);
SocialOptimumSolution solve_social_optimum(const CaseModel& model,
                                           double carbon_weight = 1.0);

/// Per-bus LMP of the carbon-blind optimum.
std::vector<double> traditional_lmp(const MarketCase& c);

/// sum b d - sum (c + kappa e) p, always at the full carbon price.
double carbon_aware_welfare(const MarketCase& c, std::span<const double> p,
                            std::span<const double> d);

/// Largest violation of balance, box and line limits at (p, d).
double max_primal_violation(const CaseModel& model, std::span<const double> p,
                            std::span<const double> d);

}  // namespace carbonmkt
