#include "carbonmkt/outcome.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include <nlohmann/json.hpp>

#include "carbonmkt/errors.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {

const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kTraditional: return "traditional";
    case Mechanism::kT1: return "t1";
    case Mechanism::kT2: return "t2";
    case Mechanism::kProposed: return "proposed";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view name) {
  for (Mechanism m : {Mechanism::kTraditional, Mechanism::kT1, Mechanism::kT2,
                      Mechanism::kProposed}) {
    if (name == to_string(m)) return m;
  }
  throw InputError("unknown mechanism '" + std::string(name) + "'");
}

MarketOutcome settle(const MarketCase& c, Mechanism mechanism,
                     std::vector<double> p, std::vector<double> d,
                     std::vector<double> generator_price,
                     std::vector<double> load_price, double tax_rate) {
  MarketOutcome o;
  o.mechanism = mechanism;
  o.tax_rate = tax_rate;
  const std::size_t ni = p.size();
  const std::size_t nj = d.size();
  o.generator_revenue.resize(ni);
  o.generator_tax.resize(ni);
  o.generator_net_profit.resize(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    const Generator& g = c.generators[i];
    o.generator_revenue[i] = generator_price[i] * p[i];
    o.generator_tax[i] = tax_rate * g.emission * p[i];
    o.generator_net_profit[i] =
        (generator_price[i] - g.cost - tax_rate * g.emission) * p[i];
    o.total_generator_revenue += o.generator_revenue[i];
    o.total_carbon_tax += o.generator_tax[i];
    o.total_generator_net_profit += o.generator_net_profit[i];
  }
  o.load_payment.resize(nj);
  o.load_net_utility.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    o.load_payment[j] = load_price[j] * d[j];
    o.load_net_utility[j] = (c.loads[j].utility - load_price[j]) * d[j];
    o.total_load_payment += o.load_payment[j];
    o.total_load_net_utility += o.load_net_utility[j];
  }
  o.subsidy =
      o.total_generator_revenue - o.total_carbon_tax - o.total_load_payment;
  o.welfare = carbon_aware_welfare(c, p, d);
  o.p = std::move(p);
  o.d = std::move(d);
  o.generator_price = std::move(generator_price);
  o.load_price = std::move(load_price);
  return o;
}

ComparisonRow summarize(const MarketOutcome& o) {
  ComparisonRow r;
  r.mechanism = to_string(o.mechanism);
  r.generator_net_profit = o.total_generator_net_profit;
  r.load_net_profit = o.total_load_net_utility;
  r.generator_revenue = o.total_generator_revenue;
  r.load_payment = o.total_load_payment;
  r.carbon_tax = o.total_carbon_tax;
  r.subsidy = o.subsidy;
  r.social_welfare = o.welfare;
  return r;
}

void write_outcome_csv(const MarketCase& c, const MarketOutcome& o,
                       std::ostream& out) {
  const double k = c.display_scale;
  const auto old_precision = out.precision();
  out << std::setprecision(10);
  out << "kind,name,bus,quantity,price,revenue_or_payment,tax,net\n";
  for (std::size_t i = 0; i < o.p.size(); ++i) {
    const Generator& g = c.generators[i];
    out << "generator," << g.name << ',' << g.bus << ',' << o.p[i] << ','
        << o.generator_price[i] << ',' << k * o.generator_revenue[i] << ','
        << k * o.generator_tax[i] << ',' << k * o.generator_net_profit[i]
        << '\n';
  }
  for (std::size_t j = 0; j < o.d.size(); ++j) {
    const Load& d = c.loads[j];
    out << "load," << d.name << ',' << d.bus << ',' << o.d[j] << ','
        << o.load_price[j] << ',' << k * o.load_payment[j] << ",0,"
        << k * o.load_net_utility[j] << '\n';
  }
  out.precision(old_precision);
}

void write_outcome_json(const MarketCase& c, const MarketOutcome& o,
                        std::ostream& out) {
  using json = nlohmann::ordered_json;
  const double k = c.display_scale;
  json root;
  root["case"] = c.name;
  root["mechanism"] = to_string(o.mechanism);
  root["display_scale"] = k;
  root["tax_rate"] = o.tax_rate;
  if (!std::isnan(o.delta)) root["delta"] = o.delta;
  if (o.mechanism == Mechanism::kProposed) root["eta"] = o.eta;
  json gens = json::array();
  for (std::size_t i = 0; i < o.p.size(); ++i) {
    gens.push_back({{"name", c.generators[i].name},
                    {"quantity", o.p[i]},
                    {"price", o.generator_price[i]},
                    {"revenue", k * o.generator_revenue[i]},
                    {"tax", k * o.generator_tax[i]},
                    {"net_profit", k * o.generator_net_profit[i]}});
  }
  json loads = json::array();
  for (std::size_t j = 0; j < o.d.size(); ++j) {
    loads.push_back({{"name", c.loads[j].name},
                     {"quantity", o.d[j]},
                     {"price", o.load_price[j]},
                     {"payment", k * o.load_payment[j]},
                     {"net_utility", k * o.load_net_utility[j]}});
  }
  root["generators"] = std::move(gens);
  root["loads"] = std::move(loads);
  json totals;
  totals["generator_revenue"] = k * o.total_generator_revenue;
  totals["carbon_tax"] = k * o.total_carbon_tax;
  totals["load_payment"] = k * o.total_load_payment;
  totals["subsidy"] = k * o.subsidy;
  totals["congestion_surplus"] = k * o.congestion_surplus;
  totals["social_welfare"] = k * o.welfare;
  if (o.breakdown) {
    totals["s1"] = k * o.breakdown->s1;
    totals["s2"] = k * o.breakdown->s2;
    totals["s3"] = k * o.breakdown->s3;
  }
  root["totals"] = std::move(totals);
  root["congested"] = o.congested;
  if (o.mechanism == Mechanism::kT2) {
    root["iterations"] = o.iterations;
    root["converged"] = o.converged;
    root["curtailed"] = o.curtailed;
  }
  out << root.dump(2) << '\n';
}

}  // namespace carbonmkt
