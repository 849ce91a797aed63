#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/market_case.hpp"

namespace carbonmkt {

enum class Mechanism { kTraditional, kT1, kT2, kProposed };

const char* to_string(Mechanism m);
/// Accepts traditional, t1, t2, proposed. Throws InputError otherwise.
Mechanism parse_mechanism(std::string_view name);

/// S1 congestion surplus, S2 carbon-tax term, S3 strong-duality term.
struct SubsidyBreakdown {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double delta_s() const { return s2 + s3; }
  double total() const { return s1 + s2 + s3; }
};

/// Dispatch, prices and cash flows of one mechanism. Money is in raw case
/// units; display scaling happens only in reports.
struct MarketOutcome {
  Mechanism mechanism = Mechanism::kTraditional;
  std::vector<double> p;
  std::vector<double> d;
  std::vector<double> generator_price;
  std::vector<double> load_price;
  /// $/mass charged on every unit of emissions
  double tax_rate = 0.0;

  std::vector<double> generator_revenue;
  std::vector<double> generator_tax;
  std::vector<double> generator_net_profit;
  std::vector<double> load_payment;
  std::vector<double> load_net_utility;

  double total_generator_revenue = 0.0;
  double total_carbon_tax = 0.0;
  double total_load_payment = 0.0;
  double total_generator_net_profit = 0.0;
  double total_load_net_utility = 0.0;
  /// revenue - tax - payment; negative means the operator keeps money
  double subsidy = 0.0;
  /// sum_l (lo_l - up_l) f_l from the pricing duals (<= 0)
  double congestion_surplus = 0.0;
  bool congested = false;
  /// sum b d - sum (c + kappa e) p at the full carbon price
  double welfare = 0.0;

  std::optional<SubsidyBreakdown> breakdown;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;

  int iterations = 0;
  bool converged = true;
  bool curtailed = false;

  /// subsidy net of congestion surplus
  double delta_s() const { return subsidy - congestion_surplus; }
};

/// Fills settlement, totals and welfare from dispatch, prices and tax rate.
MarketOutcome settle(const MarketCase& c, Mechanism mechanism,
                     std::vector<double> p, std::vector<double> d,
                     std::vector<double> generator_price,
                     std::vector<double> load_price, double tax_rate);

ComparisonRow summarize(const MarketOutcome& outcome);

/// Per-agent CSV: kind,name,bus,quantity,price,revenue_or_payment,tax,net.
void write_outcome_csv(const MarketCase& c, const MarketOutcome& outcome,
                       std::ostream& out);
void write_outcome_json(const MarketCase& c, const MarketOutcome& outcome,
                        std::ostream& out);

}  // namespace carbonmkt
