#include "carbonmkt/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

namespace {

// Column layout of the clearing program.
struct Layout {
  std::size_t ni, nj, nm;
  std::size_t p(std::size_t i) const { return i; }
  std::size_t d(std::size_t j) const { return ni + j; }
  std::size_t lambda() const { return ni + nj; }
  std::size_t mu_lo(std::size_t i) const { return ni + nj + 1 + i; }
  std::size_t mu_up(std::size_t i) const { return 2 * ni + nj + 1 + i; }
  std::size_t phi_lo(std::size_t j) const { return 3 * ni + nj + 1 + j; }
  std::size_t phi_up(std::size_t j) const { return 3 * ni + 2 * nj + 1 + j; }
  std::size_t chi_lo(std::size_t m) const { return 3 * ni + 3 * nj + 1 + m; }
  std::size_t chi_up(std::size_t m) const {
    return 3 * ni + 3 * nj + 1 + nm + m;
  }
  std::size_t width() const { return 3 * ni + 3 * nj + 1 + 2 * nm; }
};

Layout layout_of(const CaseModel& model) {
  return {model.num_generators(), model.num_loads(), model.monitored().size()};
}

void check_delta(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw InputError("delta must lie in [0, 1], got " + std::to_string(delta));
  }
}

lp::LinearProgram build_clearing(const CaseModel& model, double delta) {
  const MarketCase& c = model.market();
  const Layout L = layout_of(model);
  const double kappa = c.carbon_price;
  const double inf = lp::kInf;
  const auto& mon = model.monitored();

  lp::LinearProgram prog;
  prog.sense = lp::Sense::kMaximize;
  const std::size_t n = L.width();
  prog.objective.assign(n, 0.0);
  prog.lower.assign(n, 0.0);
  prog.upper.assign(n, inf);
  prog.variable_labels.resize(n);
  for (std::size_t i = 0; i < L.ni; ++i) {
    const Generator& g = c.generators[i];
    prog.objective[L.p(i)] = -g.carbon_cost(delta * kappa);
    prog.upper[L.p(i)] = g.capacity;
    prog.variable_labels[L.p(i)] = "p_" + g.name;
    prog.variable_labels[L.mu_lo(i)] = "mu_lo_" + g.name;
    prog.variable_labels[L.mu_up(i)] = "mu_up_" + g.name;
  }
  for (std::size_t j = 0; j < L.nj; ++j) {
    const Load& d = c.loads[j];
    prog.objective[L.d(j)] = d.utility;
    prog.upper[L.d(j)] = d.capacity;
    prog.variable_labels[L.d(j)] = "d_" + d.name;
    prog.variable_labels[L.phi_lo(j)] = "phi_lo_" + d.name;
    prog.variable_labels[L.phi_up(j)] = "phi_up_" + d.name;
  }
  prog.lower[L.lambda()] = -inf;
  prog.variable_labels[L.lambda()] = "lambda";
  for (std::size_t m = 0; m < L.nm; ++m) {
    prog.variable_labels[L.chi_lo(m)] = "chi_lo_" + std::to_string(mon[m]);
    prog.variable_labels[L.chi_up(m)] = "chi_up_" + std::to_string(mon[m]);
  }

  std::vector<double> row(n, 0.0);
  auto emit = [&](lp::Relation rel, double rhs, std::string label) {
    prog.constraints.push_back({row, rel, rhs, std::move(label)});
    std::fill(row.begin(), row.end(), 0.0);
  };

  for (std::size_t i = 0; i < L.ni; ++i) row[L.p(i)] = -1.0;
  for (std::size_t j = 0; j < L.nj; ++j) row[L.d(j)] = 1.0;
  emit(lp::Relation::kEqual, 0.0, "balance");

  for (std::size_t m = 0; m < L.nm; ++m) {
    const std::size_t l = mon[m];
    const double cap = c.network.lines[l].capacity;
    for (int side = 0; side < 2; ++side) {
      const double s = side == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < L.ni; ++i) {
        row[L.p(i)] = s * model.factor(l, model.generator_bus()[i]);
      }
      for (std::size_t j = 0; j < L.nj; ++j) {
        row[L.d(j)] = -s * model.factor(l, model.load_bus()[j]);
      }
      emit(lp::Relation::kLessEqual, cap,
           (side == 0 ? "up_" : "lo_") + std::to_string(l));
    }
  }

  // -lambda - mu_lo + mu_up - sum pi (chi_lo - chi_up) = -(c + kappa e)
  for (std::size_t i = 0; i < L.ni; ++i) {
    const Generator& g = c.generators[i];
    row[L.lambda()] = -1.0;
    row[L.mu_lo(i)] = -1.0;
    row[L.mu_up(i)] = 1.0;
    for (std::size_t m = 0; m < L.nm; ++m) {
      const double pi = model.factor(mon[m], model.generator_bus()[i]);
      row[L.chi_lo(m)] = -pi;
      row[L.chi_up(m)] = pi;
    }
    emit(lp::Relation::kEqual, -g.carbon_cost(kappa), "stat_" + g.name);
  }
  // lambda - phi_lo + phi_up + sum pi (chi_lo - chi_up) = b
  for (std::size_t j = 0; j < L.nj; ++j) {
    const Load& d = c.loads[j];
    row[L.lambda()] = 1.0;
    row[L.phi_lo(j)] = -1.0;
    row[L.phi_up(j)] = 1.0;
    for (std::size_t m = 0; m < L.nm; ++m) {
      const double pi = model.factor(mon[m], model.load_bus()[j]);
      row[L.chi_lo(m)] = pi;
      row[L.chi_up(m)] = -pi;
    }
    emit(lp::Relation::kEqual, d.utility, "stat_" + d.name);
  }
  // dual objective of the social program <= its primal objective
  for (std::size_t i = 0; i < L.ni; ++i) {
    const Generator& g = c.generators[i];
    row[L.mu_up(i)] = g.capacity;
    row[L.p(i)] = g.carbon_cost(kappa);
  }
  for (std::size_t j = 0; j < L.nj; ++j) {
    const Load& d = c.loads[j];
    row[L.phi_up(j)] = d.capacity;
    row[L.d(j)] = -d.utility;
  }
  for (std::size_t m = 0; m < L.nm; ++m) {
    const double cap = c.network.lines[mon[m]].capacity;
    row[L.chi_lo(m)] = cap;
    row[L.chi_up(m)] = cap;
  }
  emit(lp::Relation::kLessEqual, 0.0, "strong_duality");
  return prog;
}

}  // namespace

lp::LinearProgram build_market_clearing_lp(const MarketCase& c, double delta) {
  check_delta(delta);
  const CaseModel model(c);
  return build_clearing(model, delta);
}

MarketClearing::MarketClearing(const MarketCase& c)
    : model_(c), clearing_(build_clearing(model_, 1.0)) {
  dual_ = lp::dual_of(clearing_);
  sd_row_ = clearing_.num_constraints() - 1;
}

MarketClearingSolution MarketClearing::solve(double delta) const {
  check_delta(delta);
  const MarketCase& c = market();
  const Layout L = layout_of(model_);
  const auto& mon = model_.monitored();

  lp::LinearProgram clearing = clearing_;
  for (std::size_t i = 0; i < L.ni; ++i) {
    clearing.objective[L.p(i)] =
        -c.generators[i].carbon_cost(delta * c.carbon_price);
  }
  std::vector<double> min_eta(dual_.program.num_variables(), 0.0);
  min_eta[dual_.row_variable[sd_row_]] = 1.0;
  const lp::PrimalDualSolution sol =
      lp::solve_selecting_dual(clearing, min_eta, lp::Sense::kMinimize);
  if (!sol.primal.optimal() || !sol.dual.optimal()) {
    const lp::Status bad =
        sol.primal.optimal() ? sol.dual.status : sol.primal.status;
    throw NumericalFailure(std::string("market clearing reported ") +
                           lp::to_string(bad));
  }
  const std::vector<double>& x = sol.primal.primal;
  const std::vector<double>& y = sol.dual.primal;
  auto nonneg = [](double v) { return std::max(0.0, v); };

  MarketClearingSolution out;
  out.delta = delta;
  out.iterations = sol.primal.iterations + sol.dual.iterations;
  out.p.resize(L.ni);
  out.mu_lo.resize(L.ni);
  out.mu_up.resize(L.ni);
  for (std::size_t i = 0; i < L.ni; ++i) {
    out.p[i] = std::clamp(x[L.p(i)], 0.0, c.generators[i].capacity);
    out.mu_lo[i] = nonneg(x[L.mu_lo(i)]);
    out.mu_up[i] = nonneg(x[L.mu_up(i)]);
  }
  out.d.resize(L.nj);
  out.phi_lo.resize(L.nj);
  out.phi_up.resize(L.nj);
  for (std::size_t j = 0; j < L.nj; ++j) {
    out.d[j] = std::clamp(x[L.d(j)], 0.0, c.loads[j].capacity);
    out.phi_lo[j] = nonneg(x[L.phi_lo(j)]);
    out.phi_up[j] = nonneg(x[L.phi_up(j)]);
  }
  out.lambda = x[L.lambda()];

  const std::size_t nl = c.network.lines.size();
  out.chi_lo.assign(nl, 0.0);
  out.chi_up.assign(nl, 0.0);
  out.alpha_lo.assign(nl, 0.0);
  out.alpha_up.assign(nl, 0.0);
  for (std::size_t m = 0; m < L.nm; ++m) {
    const std::size_t l = mon[m];
    out.chi_lo[l] = nonneg(x[L.chi_lo(m)]);
    out.chi_up[l] = nonneg(x[L.chi_up(m)]);
    out.alpha_up[l] = nonneg(y[dual_.row_variable[1 + 2 * m]]);
    out.alpha_lo[l] = nonneg(y[dual_.row_variable[2 + 2 * m]]);
  }
  out.tau = y[dual_.row_variable[0]];
  out.eta = nonneg(y[dual_.row_variable[sd_row_]]);

  double primal_obj = 0.0;
  double dual_obj = 0.0;
  out.objective = 0.0;
  for (std::size_t i = 0; i < L.ni; ++i) {
    const Generator& g = c.generators[i];
    primal_obj -= g.carbon_cost(c.carbon_price) * out.p[i];
    out.objective -= g.carbon_cost(delta * c.carbon_price) * out.p[i];
    dual_obj += out.mu_up[i] * g.capacity;
  }
  for (std::size_t j = 0; j < L.nj; ++j) {
    primal_obj += c.loads[j].utility * out.d[j];
    out.objective += c.loads[j].utility * out.d[j];
    dual_obj += out.phi_up[j] * c.loads[j].capacity;
  }
  for (std::size_t l : mon) {
    dual_obj += (out.chi_lo[l] + out.chi_up[l]) * c.network.lines[l].capacity;
  }
  out.duality_gap = dual_obj - primal_obj;
  out.flows = model_.flows(out.p, out.d);
  return out;
}

MarketClearingSolution solve_market_clearing(const MarketCase& c,
                                             double delta) {
  const MarketClearing mc(c);
  return mc.solve(delta);
}

PriceSchedule extract_prices(const MarketClearingSolution& sol,
                             const CaseModel& model, double delta) {
  const MarketCase& c = model.market();
  const auto base = model.nodal_prices(sol.tau, sol.alpha_lo, sol.alpha_up);
  PriceSchedule out;
  out.tax_rate = delta * c.carbon_price;
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    out.generator.push_back(
        base[model.generator_bus()[i]] -
        sol.eta * c.generators[i].carbon_cost(c.carbon_price));
  }
  for (std::size_t j = 0; j < c.loads.size(); ++j) {
    out.load.push_back(base[model.load_bus()[j]] -
                       sol.eta * c.loads[j].utility);
  }
  return out;
}

SubsidyBreakdown subsidy(const MarketClearingSolution& sol,
                         const CaseModel& model, double delta) {
  const MarketCase& c = model.market();
  SubsidyBreakdown s;
  for (std::size_t l : model.monitored()) {
    s.s1 += (sol.alpha_lo[l] - sol.alpha_up[l]) * sol.flows[l];
  }
  double emissions = 0.0;
  for (std::size_t i = 0; i < sol.p.size(); ++i) {
    emissions += c.generators[i].emission * sol.p[i];
  }
  s.s2 = -delta * c.carbon_price * emissions;
  s.s3 = sol.eta * carbon_aware_welfare(c, sol.p, sol.d);
  return s;
}

double balance_gap(const MarketClearingSolution& sol, const MarketCase& c) {
  double emissions = 0.0;
  for (std::size_t i = 0; i < sol.p.size(); ++i) {
    emissions += c.generators[i].emission * sol.p[i];
  }
  return -sol.delta * c.carbon_price * emissions +
         sol.eta * carbon_aware_welfare(c, sol.p, sol.d);
}

namespace {

// Memoized clearing solves for one search.
class Evaluator {
 public:
  Evaluator(const MarketClearing& mc, std::vector<EtaPoint>* trace)
      : mc_(mc), trace_(trace) {}

  const MarketClearingSolution& at(double delta) {
    auto it = cache_.find(delta);
    if (it != cache_.end()) return it->second;
    MarketClearingSolution sol = mc_.solve(delta);
    if (trace_) {
      trace_->push_back({delta, sol.eta, balance_gap(sol, mc_.market())});
    }
    ++solves_;
    return cache_.emplace(delta, std::move(sol)).first->second;
  }
  int solves() const { return solves_; }

 private:
  const MarketClearing& mc_;
  std::vector<EtaPoint>* trace_;
  std::map<double, MarketClearingSolution> cache_;
  int solves_ = 0;
};

std::optional<double> delta_tilde_search(Evaluator& ev,
                                         const DeltaSearchOptions& o) {
  const double eta0 = ev.at(0.0).eta;
  if (eta0 <= o.eta_zero_tol) return std::nullopt;
  const double snap = o.snap_rel_tol * std::max(1.0, eta0);
  if (ev.at(1.0).eta > o.eta_zero_tol) {
    throw NumericalFailure("eta nonzero at delta = 1");
  }
  if (!(o.coarse_step > 0.0 && o.coarse_step <= 1.0)) {
    throw InputError("coarse step must lie in (0, 1]");
  }
  const long steps = std::max(1L, std::lround(1.0 / o.coarse_step));
  auto grid = [steps](long k) {
    return static_cast<double>(k) / static_cast<double>(steps);
  };
  auto positive = [&](double delta) {
    return ev.at(delta).eta > o.eta_zero_tol;
  };
  // coarse bracket: lowest grid point with eta = 0
  long k_lo = 0, k_hi = steps;
  // a positive point below lo, for the secant
  double anchor = 0.0;
  if (o.descending_sweep) {
    for (long k = steps - 1; k > 0; --k) {
      if (positive(grid(k))) {
        k_lo = k;
        break;
      }
      k_hi = k;
    }
  } else {
    // eta = 0 is upward closed in delta, so the grid can be bisected
    while (k_hi - k_lo > 1) {
      const long k = (k_lo + k_hi) / 2;
      if (positive(grid(k))) {
        anchor = grid(k_lo);
        k_lo = k;
      } else {
        k_hi = k;
      }
    }
  }
  double lo = grid(k_lo), hi = grid(k_hi);

  while (hi - lo > o.refine_tol) {
    // eta is piecewise linear in delta: aim at the zero of the line through
    // the two highest positive points, then confirm with a bracket
    const double eta_lo = ev.at(lo).eta;
    const double eta_a = ev.at(anchor).eta;
    if (lo > anchor && eta_a > eta_lo) {
      const double slope = (eta_a - eta_lo) / (lo - anchor);
      const double guess = lo + eta_lo / slope;
      const double width = 2.0 * o.eta_zero_tol / slope + o.refine_tol;
      if (guess >= hi) {
        // the line runs out past hi: the dual simplex settled on eta = 0 a
        // little early, within its feasibility tolerance
        if ((guess - hi) * slope <= snap) return guess;
        if (hi - width > lo) {
          if (positive(hi - width)) return hi;
          hi -= width;
          continue;
        }
      }
      if (guess > lo && guess < hi && guess - width > lo) {
        if (positive(guess)) {
          anchor = lo;
          lo = guess;
          continue;
        }
        hi = guess;
        if (positive(guess - width)) return guess;
        hi = guess - width;
        continue;
      }
    }
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (positive(mid)) {
      anchor = lo;
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double emissions_of(const MarketCase& c, std::span<const double> p) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) e += c.generators[i].emission * p[i];
  return e;
}

}  // namespace

std::optional<double> find_delta_tilde(const MarketClearing& mc,
                                       const DeltaSearchOptions& opts,
                                       std::vector<EtaPoint>* trace) {
  Evaluator ev(mc, trace);
  auto out = delta_tilde_search(ev, opts);
  if (trace) {
    std::sort(trace->begin(), trace->end(),
              [](const EtaPoint& a, const EtaPoint& b) {
                return a.delta < b.delta;
              });
  }
  return out;
}

MixingEquation solve_mixing_equation(const MarketCase& c, double delta_tilde,
                                     const MarketClearingSolution& at_zero,
                                     const MarketClearingSolution& at_tilde) {
  const double kappa = c.carbon_price;
  const double e0 = emissions_of(c, at_zero.p);
  const double et = emissions_of(c, at_tilde.p);
  const double w0 = carbon_aware_welfare(c, at_zero.p, at_zero.d);
  const double wt = carbon_aware_welfare(c, at_tilde.p, at_tilde.d);
  const double eta0 = at_zero.eta;

  MixingEquation q;
  q.a = -delta_tilde * kappa * (et - e0) - eta0 * (wt - w0);
  q.b = -delta_tilde * kappa * e0 + eta0 * (wt - 2.0 * w0);
  q.c = eta0 * w0;

  constexpr double slack = 1e-9;
  auto keep = [&](double x) {
    if (std::isfinite(x) && x >= -slack && x <= 1.0 + slack) {
      q.roots.push_back(std::clamp(x, 0.0, 1.0));
    }
  };
  const double scale = std::max({std::abs(q.a), std::abs(q.b), std::abs(q.c)});
  if (std::abs(q.a) <= 1e-12 * scale) {
    if (q.b != 0.0) keep(-q.c / q.b);
  } else {
    const double disc = q.b * q.b - 4.0 * q.a * q.c;
    if (disc >= 0.0) {
      // numerically stable pair
      const double s = std::sqrt(disc);
      const double t = -0.5 * (q.b + std::copysign(s, q.b));
      keep(t / q.a);
      if (t != 0.0) keep(q.c / t);
    }
  }
  std::sort(q.roots.begin(), q.roots.end());
  q.roots.erase(std::unique(q.roots.begin(), q.roots.end()), q.roots.end());
  if (q.roots.empty()) {
    throw NumericalFailure("mixing equation has no root in [0, 1]");
  }
  return q;
}

DeltaSearchResult determine_delta(const MarketClearing& mc,
                                  const DeltaSearchOptions& opts) {
  const MarketCase& c = mc.market();
  DeltaSearchResult r;
  Evaluator ev(mc, &r.trace);
  auto finish = [&] {
    std::sort(r.trace.begin(), r.trace.end(),
              [](const EtaPoint& a, const EtaPoint& b) {
                return a.delta < b.delta;
              });
    r.solves = ev.solves();
    return r;
  };

  const auto tilde = delta_tilde_search(ev, opts);
  if (!tilde) {
    r.eta_always_zero = true;
    const double cost = c.carbon_price * emissions_of(c, ev.at(0.0).p);
    if (cost == 0.0) {
      r.delta_tilde = r.x = r.delta = 1.0;
    } else {
      r.delta_tilde = 0.0;
      r.x = 0.0;
      r.delta = 0.0;
      r.no_balancing_needed = true;
    }
    return finish();
  }
  r.delta_tilde = *tilde;
  const MarketClearingSolution& s0 = ev.at(0.0);
  const MarketClearingSolution& st = ev.at(r.delta_tilde);

  auto tolerance = [&](double delta, const MarketClearingSolution& s) {
    const double s2 = delta * c.carbon_price * emissions_of(c, s.p);
    return opts.balance_rel_tol * std::max(1.0, std::abs(s2));
  };

  double best_x = 1.0;
  double best_gap = lp::kInf;
  bool have_root = false;
  try {
    const MixingEquation q = solve_mixing_equation(c, r.delta_tilde, s0, st);
    have_root = true;
    for (double x : q.roots) {
      const double gap = std::abs(balance_gap(ev.at(x * r.delta_tilde), c));
      if (gap < best_gap) {
        best_gap = gap;
        best_x = x;
      }
    }
  } catch (const NumericalFailure&) {
    have_root = false;
  }

  double delta = best_x * r.delta_tilde;
  if (!have_root || best_gap > tolerance(delta, ev.at(delta))) {
    // Illinois iteration on the directly evaluated gap, which falls with
    // delta from S3 > 0 at 0 to S2 < 0 at delta_tilde.
    r.polished = true;
    double a = 0.0, fa = balance_gap(s0, c);
    double b = r.delta_tilde, fb = balance_gap(st, c);
    if (have_root && delta > a && delta < b) {
      const double fd = balance_gap(ev.at(delta), c);
      if (fd > 0.0) {
        a = delta;
        fa = fd;
      } else {
        b = delta;
        fb = fd;
      }
    }
    int side = 0;
    for (int it = 0; it < opts.max_polish_iterations; ++it) {
      double m = fa != fb ? (a * fb - b * fa) / (fb - fa) : 0.5 * (a + b);
      if (!(m > a && m < b)) m = 0.5 * (a + b);
      const double fm = balance_gap(ev.at(m), c);
      delta = m;
      if (std::abs(fm) <= tolerance(m, ev.at(m)) || b - a < 1e-15) break;
      if ((fm > 0.0) == (fa > 0.0)) {
        a = m;
        fa = fm;
        if (side == -1) fb *= 0.5;
        side = -1;
      } else {
        b = m;
        fb = fm;
        if (side == 1) fa *= 0.5;
        side = 1;
      }
    }
    best_x = r.delta_tilde > 0.0 ? delta / r.delta_tilde : 0.0;
  }
  r.x = best_x;
  r.delta = delta;
  return finish();
}

bool any_line_at_limit(const CaseModel& model, std::span<const double> flows,
                       double tol) {
  const MarketCase& c = model.market();
  for (std::size_t l : model.monitored()) {
    const double cap = c.network.lines[l].capacity;
    if (std::abs(flows[l]) >= cap - tol * std::max(1.0, cap)) return true;
  }
  return false;
}

MarketOutcome proposed_outcome(const MarketClearingSolution& sol,
                               const CaseModel& model) {
  const MarketCase& c = model.market();
  PriceSchedule prices = extract_prices(sol, model, sol.delta);
  MarketOutcome o =
      settle(c, Mechanism::kProposed, sol.p, sol.d, std::move(prices.generator),
             std::move(prices.load), prices.tax_rate);
  const SubsidyBreakdown s = subsidy(sol, model, sol.delta);
  o.breakdown = s;
  o.congestion_surplus = s.s1;
  o.congested = any_line_at_limit(model, sol.flows);
  o.delta = sol.delta;
  o.eta = sol.eta;
  o.iterations = sol.iterations;
  return o;
}

MarketOutcome run_proposed(const MarketCase& c, DeltaMode mode,
                           const DeltaSearchOptions& opts,
                           DeltaSearchResult* search) {
  if (!mode.automatic) check_delta(mode.value);
  const MarketClearing mc(c);
  double delta = mode.value;
  if (mode.automatic) {
    DeltaSearchResult r = determine_delta(mc, opts);
    delta = r.delta;
    if (search) *search = std::move(r);
  }
  return proposed_outcome(mc.solve(delta), mc.model());
}

}  // namespace carbonmkt
