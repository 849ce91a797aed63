#include "carbonmkt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carbonmkt/cef.hpp"
#include "carbonmkt/errors.hpp"
#include "carbonmkt/lp.hpp"
#include "carbonmkt/mechanism.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {

namespace {

double congestion_surplus(const CaseModel& model,
                          std::span<const double> lo,
                          std::span<const double> up,
                          std::span<const double> flows) {
  double s = 0.0;
  for (std::size_t l : model.monitored()) s += (lo[l] - up[l]) * flows[l];
  return s;
}

MarketOutcome lmp_outcome(const MarketCase& c, Mechanism mech,
                          double carbon_weight, double tax_rate) {
  const CaseModel model(c);
  const SocialOptimumSolution s = solve_social_optimum(model, carbon_weight);
  const auto price = model.nodal_prices(s.lambda, s.chi_lo, s.chi_up);
  std::vector<double> gp, dp;
  for (std::size_t b : model.generator_bus()) gp.push_back(price[b]);
  for (std::size_t b : model.load_bus()) dp.push_back(price[b]);
  MarketOutcome o = settle(c, mech, s.p, s.d, gp, dp, tax_rate);
  o.congestion_surplus = congestion_surplus(model, s.chi_lo, s.chi_up, s.flows);
  o.congested = any_line_at_limit(model, s.flows);
  o.iterations = s.iterations;
  return o;
}

struct OpfResult {
  std::vector<double> p;
  std::vector<double> flows;
  std::vector<double> lmp;  // per bus
  std::vector<double> chi_lo, chi_up;
  bool feasible = false;
};

// min sum c p  s.t.  sum p = sum d, boxes, line limits, with d fixed.
OpfResult cost_only_opf(const CaseModel& model, std::span<const double> d) {
  const MarketCase& c = model.market();
  const std::size_t ni = model.num_generators();
  lp::LinearProgram prog;
  prog.sense = lp::Sense::kMaximize;
  for (const Generator& g : c.generators) {
    prog.add_variable("p_" + g.name, -g.cost, 0.0, g.capacity);
  }
  double total = 0.0;
  for (double v : d) total += v;
  prog.add_constraint(std::vector<double>(ni, 1.0), lp::Relation::kEqual,
                      total, "balance");
  std::vector<double> row(ni);
  for (std::size_t l : model.monitored()) {
    double load_flow = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      load_flow += model.factor(l, model.load_bus()[j]) * d[j];
    }
    for (std::size_t i = 0; i < ni; ++i) {
      row[i] = model.factor(l, model.generator_bus()[i]);
    }
    const double cap = c.network.lines[l].capacity;
    prog.add_constraint(row, lp::Relation::kLessEqual, cap + load_flow);
    for (double& v : row) v = -v;
    prog.add_constraint(row, lp::Relation::kLessEqual, cap - load_flow);
  }
  const lp::LpSolution sol = lp::solve(prog);
  OpfResult out;
  if (sol.status == lp::Status::kInfeasible) return out;
  if (!sol.optimal()) {
    throw NumericalFailure(std::string("T2 dispatch reported ") +
                           lp::to_string(sol.status));
  }
  out.feasible = true;
  out.p.assign(sol.primal.begin(), sol.primal.end());
  for (std::size_t i = 0; i < ni; ++i) {
    out.p[i] = std::clamp(out.p[i], 0.0, c.generators[i].capacity);
  }
  const std::size_t nl = c.network.lines.size();
  out.chi_lo.assign(nl, 0.0);
  out.chi_up.assign(nl, 0.0);
  std::size_t k = 1;
  for (std::size_t l : model.monitored()) {
    out.chi_up[l] = std::max(0.0, sol.duals[k++]);
    out.chi_lo[l] = std::max(0.0, sol.duals[k++]);
  }
  // the balance dual is d(-cost)/d(demand)
  out.lmp = model.nodal_prices(-sol.duals[0], out.chi_lo, out.chi_up);
  out.flows = model.flows(out.p, d);
  return out;
}

// Largest s in [0, 1] for which s * d can be delivered.
double deliverable_fraction(const CaseModel& model, std::span<const double> d) {
  const MarketCase& c = model.market();
  const std::size_t ni = model.num_generators();
  lp::LinearProgram prog;
  prog.sense = lp::Sense::kMaximize;
  for (const Generator& g : c.generators) {
    prog.add_variable("p_" + g.name, 0.0, 0.0, g.capacity);
  }
  const std::size_t s = prog.add_variable("s", 1.0, 0.0, 1.0);
  double total = 0.0;
  for (double v : d) total += v;
  std::vector<double> row(ni + 1, 1.0);
  row[s] = -total;
  prog.add_constraint(row, lp::Relation::kEqual, 0.0, "balance");
  for (std::size_t l : model.monitored()) {
    double load_flow = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      load_flow += model.factor(l, model.load_bus()[j]) * d[j];
    }
    for (std::size_t i = 0; i < ni; ++i) {
      row[i] = model.factor(l, model.generator_bus()[i]);
    }
    row[s] = -load_flow;
    const double cap = c.network.lines[l].capacity;
    prog.add_constraint(row, lp::Relation::kLessEqual, cap);
    for (double& v : row) v = -v;
    prog.add_constraint(row, lp::Relation::kLessEqual, cap);
  }
  const lp::LpSolution sol = lp::solve(prog);
  if (!sol.optimal()) {
    throw NumericalFailure("T2 curtailment program failed");
  }
  return std::clamp(sol.primal[s], 0.0, 1.0);
}

struct T2Step {
  OpfResult opf;
  std::vector<double> d;
  std::vector<double> gen_price;
  std::vector<double> load_price;
  bool curtailed = false;
};

// Upper level at fixed demand: dispatch, LMPs, intensities and T2 prices.
T2Step upper_level(const CaseModel& model, std::vector<double> d,
                   const T2Options& opts) {
  const MarketCase& c = model.market();
  T2Step st;
  st.opf = cost_only_opf(model, d);
  if (!st.opf.feasible) {
    double s = deliverable_fraction(model, d);
    for (int attempt = 0; attempt < 8 && !st.opf.feasible; ++attempt) {
      for (double& v : d) v *= s;
      st.opf = cost_only_opf(model, d);
      s = 1.0 - 1e-9 * std::pow(10.0, attempt);
    }
    if (!st.opf.feasible) {
      throw NumericalFailure("T2 dispatch infeasible after curtailment");
    }
    st.curtailed = true;
  }
  const NciResult nci = compute_nci(c, st.opf.p, d, st.opf.flows);
  const double kappa = c.carbon_price;
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    double price = st.opf.lmp[model.generator_bus()[i]];
    if (opts.generator_carbon_price) price += kappa * nci.sigma_generator[i];
    st.gen_price.push_back(price);
  }
  for (std::size_t j = 0; j < c.loads.size(); ++j) {
    st.load_price.push_back(st.opf.lmp[model.load_bus()[j]] +
                            kappa * nci.sigma_load[j]);
  }
  st.d = std::move(d);
  return st;
}

// Bang-bang demand response; indifferent loads keep their quantity.
std::vector<double> best_response(const MarketCase& c,
                                  std::span<const double> price,
                                  std::span<const double> current) {
  constexpr double tie = 1e-12;
  std::vector<double> out(current.begin(), current.end());
  for (std::size_t j = 0; j < c.loads.size(); ++j) {
    const double margin = c.loads[j].utility - price[j];
    if (margin > tie) out[j] = c.loads[j].capacity;
    if (margin < -tie) out[j] = 0.0;
  }
  return out;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a[k] - b[k]));
  }
  return m;
}

}  // namespace

MarketOutcome run_traditional(const MarketCase& c) {
  return lmp_outcome(c, Mechanism::kTraditional, 0.0, 0.0);
}

MarketOutcome run_t1(const MarketCase& c) {
  return lmp_outcome(c, Mechanism::kT1, 1.0, c.carbon_price);
}

void T2Options::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw InputError("T2 damping must lie in (0, 1]");
  }
  if (max_iterations < 1) {
    throw InputError("T2 needs at least one iteration");
  }
}

MarketOutcome run_t2(const MarketCase& c, const T2Options& opts) {
  opts.validate();
  const CaseModel model(c);
  double max_cap = 0.0;
  std::vector<double> d;
  for (const Load& l : c.loads) {
    d.push_back(l.capacity);
    max_cap = std::max(max_cap, l.capacity);
  }
  const double tol =
      opts.tolerance > 0.0 ? opts.tolerance : 1e-6 * std::max(1.0, max_cap);

  bool curtailed = false;
  bool converged = false;
  int iterations = 0;
  T2Step st = upper_level(model, d, opts);
  curtailed = curtailed || st.curtailed;
  while (iterations < opts.max_iterations) {
    ++iterations;
    const std::vector<double> target = best_response(c, st.load_price, st.d);
    if (sup_distance(target, st.d) <= tol) {
      // snap onto the exact best response and confirm it is a fixed point
      T2Step snapped = upper_level(model, target, opts);
      const auto check = best_response(c, snapped.load_price, snapped.d);
      if (sup_distance(check, snapped.d) <= tol) {
        st = std::move(snapped);
        curtailed = curtailed || st.curtailed;
        converged = true;
        break;
      }
    }
    std::vector<double> next(st.d.size());
    for (std::size_t j = 0; j < next.size(); ++j) {
      next[j] = opts.damping * target[j] + (1.0 - opts.damping) * st.d[j];
    }
    st = upper_level(model, std::move(next), opts);
    curtailed = curtailed || st.curtailed;
  }

  const double tax = opts.generator_carbon_tax ? c.carbon_price : 0.0;
  MarketOutcome o = settle(c, Mechanism::kT2, st.opf.p, st.d, st.gen_price,
                           st.load_price, tax);
  o.congestion_surplus =
      congestion_surplus(model, st.opf.chi_lo, st.opf.chi_up, st.opf.flows);
  o.congested = any_line_at_limit(model, st.opf.flows);
  o.iterations = iterations;
  o.converged = converged;
  o.curtailed = curtailed;
  return o;
}

MarketOutcome run_mechanism(const MarketCase& c, Mechanism m,
                            const T2Options& t2) {
  switch (m) {
    case Mechanism::kTraditional: return run_traditional(c);
    case Mechanism::kT1: return run_t1(c);
    case Mechanism::kT2: return run_t2(c, t2);
    case Mechanism::kProposed: return run_proposed(c);
  }
  throw InputError("unknown mechanism");
}

}  // namespace carbonmkt
