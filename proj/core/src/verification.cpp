#include "carbonmkt/verification.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "carbonmkt/errors.hpp"
#include "carbonmkt/mechanism.hpp"
#include "carbonmkt/social_optimum.hpp"

namespace carbonmkt {

namespace {

PropertyReport single(PropertyResult r) {
  PropertyReport rep;
  rep.properties.push_back(std::move(r));
  return rep;
}

std::string factor_label(double f) {
  std::ostringstream os;
  os << 'x' << std::setprecision(3) << f;
  return os.str();
}

double value_gap(double margin, double cap, double quantity) {
  return std::max(0.0, margin) * cap - margin * quantity;
}

}  // namespace

bool PropertyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& r) { return r.passed(); });
}

const PropertyResult& PropertyReport::at(const std::string& name) const {
  for (const PropertyResult& r : properties) {
    if (r.name == name) return r;
  }
  throw InputError("no property named " + name);
}

void PropertyReport::append(const PropertyReport& other) {
  properties.insert(properties.end(), other.properties.begin(),
                    other.properties.end());
}

std::vector<double> default_perturbation_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 8; ++k) g.push_back(0.8 + 0.05 * k);
  return g;
}

PropertyReport check_budget_balance(const MarketOutcome& o,
                                    const VerificationOptions& opts) {
  const double s2 = o.breakdown ? o.breakdown->s2 : -o.total_carbon_tax;
  PropertyResult r{"budget_balance",
                   opts.balance_rel_tol * std::max(1.0, std::abs(s2)), {}};
  const double ds = o.delta_s();
  if (std::abs(ds) > r.tolerance) r.witnesses.push_back({"delta_s", ds});
  if (!o.congested && std::abs(o.subsidy) > r.tolerance) {
    r.witnesses.push_back({"subsidy", o.subsidy});
  }
  return single(std::move(r));
}

PropertyReport check_individual_rationality(const MarketOutcome& o,
                                            const MarketCase& c,
                                            const VerificationOptions& opts) {
  PropertyResult r{"individual_rationality", opts.rationality_tol, {}};
  for (std::size_t i = 0; i < o.generator_net_profit.size(); ++i) {
    if (o.generator_net_profit[i] < -r.tolerance) {
      r.witnesses.push_back({c.generators[i].name, o.generator_net_profit[i]});
    }
  }
  for (std::size_t j = 0; j < o.load_net_utility.size(); ++j) {
    if (o.load_net_utility[j] < -r.tolerance) {
      r.witnesses.push_back({c.loads[j].name, o.load_net_utility[j]});
    }
  }
  return single(std::move(r));
}

PropertyReport check_dispatch_following(const MarketCase& c,
                                        std::span<const double> gen_price,
                                        std::span<const double> load_price,
                                        double tax_rate,
                                        std::span<const double> p,
                                        std::span<const double> d,
                                        const VerificationOptions& opts) {
  PropertyResult r{"dispatch_following", opts.dispatch_rel_tol, {}};
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const Generator& g = c.generators[i];
    const double margin = gen_price[i] - g.cost - tax_rate * g.emission;
    const double gap = value_gap(margin, g.capacity, p[i]);
    const double best = std::max(0.0, margin) * g.capacity;
    if (gap > r.tolerance * std::max(1.0, best)) {
      r.witnesses.push_back({g.name, gap});
    }
  }
  for (std::size_t j = 0; j < c.loads.size(); ++j) {
    const Load& l = c.loads[j];
    const double margin = l.utility - load_price[j];
    const double gap = value_gap(margin, l.capacity, d[j]);
    const double best = std::max(0.0, margin) * l.capacity;
    if (gap > r.tolerance * std::max(1.0, best)) {
      r.witnesses.push_back({l.name, gap});
    }
  }
  const double optimum = solve_social_optimum(c).welfare;
  const double shortfall = optimum - carbon_aware_welfare(c, p, d);
  if (shortfall > r.tolerance * std::max(1.0, std::abs(optimum))) {
    r.witnesses.push_back({"welfare", shortfall});
  }
  return single(std::move(r));
}

PropertyReport check_dispatch_following(const MarketCase& c,
                                        const MarketOutcome& o,
                                        const VerificationOptions& opts) {
  return check_dispatch_following(c, o.generator_price, o.load_price,
                                  o.tax_rate, o.p, o.d, opts);
}

PropertyReport check_truthful_bidding(const MarketCase& c,
                                      const MarketOutcome& o,
                                      const VerificationOptions& opts) {
  PropertyResult r{"truthful_bidding", opts.truthful_tol, {}};
  // profit at the frozen prices, always scored with the true parameters
  auto gen_profit = [&](std::size_t i, double q) {
    const Generator& g = c.generators[i];
    q = std::clamp(q, 0.0, g.capacity);
    return (o.generator_price[i] - g.cost - o.tax_rate * g.emission) * q;
  };
  auto load_utility = [&](std::size_t j, double q) {
    const Load& l = c.loads[j];
    q = std::clamp(q, 0.0, l.capacity);
    return (l.utility - o.load_price[j]) * q;
  };
  // Bids only move objective coefficients and boxes, so every probe edits a
  // copy of the truthful program and starts from its optimal basis.
  const CaseModel model(c);
  const lp::LinearProgram base = build_social_lp(model, 1.0);
  const lp::LpSolution truth = lp::solve(base);
  if (!truth.optimal()) {
    throw NumericalFailure(std::string("social optimum reported ") +
                           lp::to_string(truth.status));
  }
  const double kappa = c.carbon_price;
  const std::size_t ni = c.generators.size();
  auto probe = [&](const std::string& agent, const char* param,
                   double truthful, auto&& mutate, auto&& score) {
    for (double f : opts.perturbation_grid) {
      if (f == 1.0) continue;
      lp::LinearProgram bid = base;
      mutate(bid, f);
      const lp::LpSolution s = truth.basis.empty()
                                   ? lp::solve(bid)
                                   : lp::solve(bid, truth.basis);
      if (!s.optimal()) {
        throw NumericalFailure(std::string("social optimum reported ") +
                               lp::to_string(s.status));
      }
      const double lie = score(s.primal);
      if (lie > truthful + r.tolerance) {
        r.witnesses.push_back(
            {agent + ":" + param + " " + factor_label(f), lie - truthful});
      }
    }
  };

  for (std::size_t i = 0; i < ni; ++i) {
    const Generator& g = c.generators[i];
    const double truthful = gen_profit(i, o.p[i]);
    auto score = [&](const std::vector<double>& x) {
      return gen_profit(i, x[i]);
    };
    probe(g.name, "cost", truthful,
          [&](lp::LinearProgram& m, double f) {
            m.objective[i] = -(f * g.cost + kappa * g.emission);
          },
          score);
    probe(g.name, "emission", truthful,
          [&](lp::LinearProgram& m, double f) {
            m.objective[i] = -(g.cost + kappa * f * g.emission);
          },
          score);
    probe(g.name, "capacity", truthful,
          [&](lp::LinearProgram& m, double f) { m.upper[i] = f * g.capacity; },
          score);
  }
  for (std::size_t j = 0; j < c.loads.size(); ++j) {
    const Load& l = c.loads[j];
    const double truthful = load_utility(j, o.d[j]);
    auto score = [&](const std::vector<double>& x) {
      return load_utility(j, x[ni + j]);
    };
    probe(l.name, "utility", truthful,
          [&](lp::LinearProgram& m, double f) {
            m.objective[ni + j] = f * l.utility;
          },
          score);
    probe(l.name, "capacity", truthful,
          [&](lp::LinearProgram& m, double f) {
            m.upper[ni + j] = f * l.capacity;
          },
          score);
  }
  return single(std::move(r));
}

PropertyReport check_lemma_linearity(const MarketCase& c,
                                     std::span<const double> samples,
                                     const VerificationOptions& opts) {
  const MarketClearing mc(c);
  const double eta0 = mc.solve(0.0).eta;
  const auto tilde = find_delta_tilde(mc);
  if (!tilde) throw InputError("eta is already zero at delta = 0");
  PropertyResult r{"eta_linearity", opts.linearity_tol, {}};
  for (double delta : samples) {
    const double expected =
        delta < *tilde ? eta0 * (1.0 - delta / *tilde) : 0.0;
    const double err = mc.solve(delta).eta - expected;
    if (std::abs(err) > r.tolerance) {
      r.witnesses.push_back({"delta=" + std::to_string(delta), err});
    }
  }
  return single(std::move(r));
}

PropertyReport run_property_suite(const MarketCase& c, const MarketOutcome& o,
                                  const VerificationOptions& opts) {
  PropertyReport rep;
  rep.subject = to_string(o.mechanism);
  rep.append(check_budget_balance(o, opts));
  rep.append(check_individual_rationality(o, c, opts));
  rep.append(check_dispatch_following(c, o, opts));
  rep.append(check_truthful_bidding(c, o, opts));
  return rep;
}

double brute_force_welfare(const MarketCase& c, double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 1.0)) {
    throw InputError("grid step must lie in (0, 1]");
  }
  const std::size_t ni = c.generators.size();
  const std::size_t nj = c.loads.size();
  if (ni > 3 || nj > 3 ||
      (!c.network.copper_plate && c.network.lines.size() > 2)) {
    throw TooLargeCase("brute force takes at most 3 generators, 3 loads and 2 "
                       "lines");
  }
  const CaseModel model(c);
  const std::size_t n = ni + nj;
  std::vector<double> cap(n), coef(n);
  for (std::size_t i = 0; i < ni; ++i) {
    const Generator& g = c.generators[i];
    cap[i] = g.capacity;
    coef[i] = -(g.cost + c.carbon_price * g.emission);
  }
  for (std::size_t j = 0; j < nj; ++j) {
    cap[ni + j] = c.loads[j].capacity;
    coef[ni + j] = c.loads[j].utility;
  }
  const auto steps = static_cast<std::size_t>(std::floor(1.0 / grid_step + 1e-9));
  std::vector<std::vector<double>> lattice(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t k = 0; k <= steps; ++k) {
      lattice[v].push_back(std::min(cap[v], k * grid_step * cap[v]));
    }
    if (lattice[v].back() < cap[v]) lattice[v].push_back(cap[v]);
  }

  double best = 0.0;  // nobody trades
  std::vector<double> x(n), p(ni), d(nj);
  std::vector<std::size_t> idx(n);
  const double slack = 1e-9;
  for (std::size_t free = 0; free < n; ++free) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double net = 0.0;  // supply minus demand over the lattice agents
      for (std::size_t v = 0; v < n; ++v) {
        if (v == free) continue;
        x[v] = lattice[v][idx[v]];
        net += v < ni ? x[v] : -x[v];
      }
      x[free] = free < ni ? -net : net;
      if (x[free] >= -slack && x[free] <= cap[free] + slack) {
        x[free] = std::clamp(x[free], 0.0, cap[free]);
        bool ok = true;
        if (!c.network.copper_plate) {
          std::copy(x.begin(), x.begin() + static_cast<long>(ni), p.begin());
          std::copy(x.begin() + static_cast<long>(ni), x.end(), d.begin());
          const auto f = model.flows(p, d);
          for (std::size_t l : model.monitored()) {
            if (std::abs(f[l]) > c.network.lines[l].capacity + slack) {
              ok = false;
              break;
            }
          }
        }
        if (ok) {
          double w = 0.0;
          for (std::size_t v = 0; v < n; ++v) w += coef[v] * x[v];
          best = std::max(best, w);
        }
      }
      // odometer over every agent but the free one
      std::size_t v = 0;
      for (; v < n; ++v) {
        if (v == free) continue;
        if (++idx[v] < lattice[v].size()) break;
        idx[v] = 0;
      }
      if (v == n) break;
    }
  }
  return best;
}

double brute_force_bound(const MarketCase& c, double grid_step) {
  double lipschitz = 0.0, total_cap = 0.0;
  for (const Generator& g : c.generators) {
    lipschitz = std::max(lipschitz, g.cost + c.carbon_price * g.emission);
    total_cap += g.capacity;
  }
  for (const Load& l : c.loads) {
    lipschitz = std::max(lipschitz, std::abs(l.utility));
    total_cap += l.capacity;
  }
  // moving every agent one cell, and the free agent by the sum of those moves
  return 2.0 * lipschitz * grid_step * total_cap;
}

void write_property_report_csv(const PropertyReport& report,
                               std::ostream& out) {
  out << "property,passed,tolerance,agent,magnitude\n";
  out << std::setprecision(10);
  for (const PropertyResult& r : report.properties) {
    if (r.passed()) {
      out << r.name << ",true," << r.tolerance << ",,\n";
      continue;
    }
    for (const Witness& w : r.witnesses) {
      out << r.name << ",false," << r.tolerance << ',' << w.agent << ','
          << w.magnitude << '\n';
    }
  }
}

void write_property_report_json(const PropertyReport& report,
                                std::ostream& out) {
  nlohmann::ordered_json j;
  j["subject"] = report.subject;
  j["passed"] = report.passed();
  j["properties"] = nlohmann::ordered_json::array();
  for (const PropertyResult& r : report.properties) {
    nlohmann::ordered_json pr;
    pr["name"] = r.name;
    pr["passed"] = r.passed();
    pr["tolerance"] = r.tolerance;
    pr["witnesses"] = nlohmann::ordered_json::array();
    for (const Witness& w : r.witnesses) {
      pr["witnesses"].push_back({{"agent", w.agent}, {"magnitude", w.magnitude}});
    }
    j["properties"].push_back(std::move(pr));
  }
  out << j.dump(2) << '\n';
}

}  // namespace carbonmkt
