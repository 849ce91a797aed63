#include "carbonmkt/social_optimum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

CaseModel::CaseModel(const MarketCase& c) : case_(c) {
  c.validate();
  gen_bus_ = c.generator_buses();
  load_bus_ = c.load_buses();
  if (c.network.copper_plate) return;
  ptdf_ = compute_ptdf(c.network);
  for (std::size_t l = 0; l < c.network.lines.size(); ++l) {
    if (c.network.lines[l].monitored()) monitored_.push_back(l);
  }
}

double CaseModel::factor(std::size_t line, std::size_t bus) const {
  return copper_plate() ? 0.0 : ptdf_(line, bus);
}

std::vector<double> CaseModel::flows(std::span<const double> p,
                                     std::span<const double> d) const {
  if (copper_plate()) return {};
  const auto q = bus_injections(num_buses(), p, gen_bus_, d, load_bus_);
  return ptdf_.flows(q);
}

std::vector<double> CaseModel::nodal_prices(double lambda,
                                            std::span<const double> lo,
                                            std::span<const double> up) const {
  std::vector<double> price(num_buses(), lambda);
  for (std::size_t l : monitored_) {
    const double w = lo[l] - up[l];
    if (w == 0.0) continue;
    for (std::size_t n = 0; n < price.size(); ++n) price[n] += ptdf_(l, n) * w;
  }
  return price;
}

lp::LinearProgram build_social_lp(const CaseModel& model,
                                  double carbon_weight) {
  const MarketCase& c = model.market();
  const std::size_t ni = model.num_generators();
  const std::size_t nj = model.num_loads();
  const double kappa = carbon_weight * c.carbon_price;

  lp::LinearProgram prog;
  prog.sense = lp::Sense::kMaximize;
  for (std::size_t i = 0; i < ni; ++i) {
    const Generator& g = c.generators[i];
    prog.add_variable("p_" + g.name, -g.carbon_cost(kappa), 0.0, g.capacity);
  }
  for (std::size_t j = 0; j < nj; ++j) {
    const Load& d = c.loads[j];
    prog.add_variable("d_" + d.name, d.utility, 0.0, d.capacity);
  }
  std::vector<double> row(ni + nj, 0.0);
  for (std::size_t i = 0; i < ni; ++i) row[i] = -1.0;
  for (std::size_t j = 0; j < nj; ++j) row[ni + j] = 1.0;
  prog.add_constraint(row, lp::Relation::kEqual, 0.0, "balance");

  for (std::size_t l : model.monitored()) {
    for (std::size_t i = 0; i < ni; ++i) {
      row[i] = model.factor(l, model.generator_bus()[i]);
    }
    for (std::size_t j = 0; j < nj; ++j) {
      row[ni + j] = -model.factor(l, model.load_bus()[j]);
    }
    const double cap = c.network.lines[l].capacity;
    const std::string tag = std::to_string(l);
    prog.add_constraint(row, lp::Relation::kLessEqual, cap, "up_" + tag);
    for (double& v : row) v = -v;
    prog.add_constraint(row, lp::Relation::kLessEqual, cap, "lo_" + tag);
  }
  return prog;
}

lp::LinearProgram build_social_lp(const MarketCase& c, double carbon_weight) {
  const CaseModel model(c);
  return build_social_lp(model, carbon_weight);
}

SocialOptimumSolution solve_social_optimum(const CaseModel& model,
                                           double carbon_weight) {
  const MarketCase& c = model.market();
  const std::size_t ni = model.num_generators();
  const std::size_t nj = model.num_loads();
  const lp::LinearProgram prog = build_social_lp(model, carbon_weight);
  const lp::LpSolution sol = lp::solve(prog);
  if (!sol.optimal()) {
    // zero trade is always feasible and the box keeps the objective bounded
    throw NumericalFailure(std::string("social optimum reported ") +
                           lp::to_string(sol.status));
  }

  SocialOptimumSolution out;
  out.iterations = sol.iterations;
  out.welfare = sol.objective;
  out.p.assign(sol.primal.begin(), sol.primal.begin() + ni);
  out.d.assign(sol.primal.begin() + ni, sol.primal.end());
  out.lambda = sol.duals[0];

  const std::size_t nl = c.network.lines.size();
  out.chi_lo.assign(nl, 0.0);
  out.chi_up.assign(nl, 0.0);
  std::size_t k = 1;
  for (std::size_t l : model.monitored()) {
    out.chi_up[l] = std::max(0.0, sol.duals[k++]);
    out.chi_lo[l] = std::max(0.0, sol.duals[k++]);
  }
  // reduced cost r = mu_up - mu_lo for generators, phi_up - phi_lo for loads
  out.mu_lo.resize(ni);
  out.mu_up.resize(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    const double r = sol.reduced_costs[i];
    out.mu_up[i] = std::max(0.0, r);
    out.mu_lo[i] = std::max(0.0, -r);
  }
  out.phi_lo.resize(nj);
  out.phi_up.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    const double r = sol.reduced_costs[ni + j];
    out.phi_up[j] = std::max(0.0, r);
    out.phi_lo[j] = std::max(0.0, -r);
  }
  out.flows = model.flows(out.p, out.d);
  return out;
}

SocialOptimumSolution solve_social_optimum(const MarketCase& c,
                                           double carbon_weight) {
  const CaseModel model(c);
  return solve_social_optimum(model, carbon_weight);
}

std::vector<double> traditional_lmp(const MarketCase& c) {
  const CaseModel model(c);
  const SocialOptimumSolution s = solve_social_optimum(model, 0.0);
  return model.nodal_prices(s.lambda, s.chi_lo, s.chi_up);
}

double carbon_aware_welfare(const MarketCase& c, std::span<const double> p,
                            std::span<const double> d) {
  double w = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) w += c.loads[j].utility * d[j];
  for (std::size_t i = 0; i < p.size(); ++i) {
    w -= c.generators[i].carbon_cost(c.carbon_price) * p[i];
  }
  return w;
}

double max_primal_violation(const CaseModel& model, std::span<const double> p,
                            std::span<const double> d) {
  const MarketCase& c = model.market();
  double worst = 0.0;
  double balance = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    worst = std::max({worst, -p[i], p[i] - c.generators[i].capacity});
    balance += p[i];
  }
  for (std::size_t j = 0; j < d.size(); ++j) {
    worst = std::max({worst, -d[j], d[j] - c.loads[j].capacity});
    balance -= d[j];
  }
  worst = std::max(worst, std::abs(balance));
  if (!model.copper_plate()) {
    const auto f = model.flows(p, d);
    for (std::size_t l : model.monitored()) {
      worst = std::max(worst, std::abs(f[l]) - c.network.lines[l].capacity);
    }
  }
  return worst;
}

}  // namespace carbonmkt
