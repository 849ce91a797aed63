#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "carbonmkt/errors.hpp"
#include "carbonmkt/social_optimum.hpp"
#include "carbonmkt/verification.hpp"

namespace carbonmkt::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr Mechanism kAll[] = {Mechanism::kTraditional, Mechanism::kT1,
                              Mechanism::kT2, Mechanism::kProposed};

// Runs f(0..n-1) on up to `jobs` threads. Results are written by index, so
// callers see the same output for any worker count; the lowest-index
// exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const auto workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

DeltaMode parse_delta(const std::string& text) {
  if (text == "auto") return {};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 0.0 && v <= 1.0)) {
    throw InputError("--delta takes auto or a number in [0, 1], got '" + text +
                     "'");
  }
  return DeltaMode::fixed(v);
}

Mechanism selected(const RunConfig& cfg) {
  return cfg.mechanism.empty() ? Mechanism::kProposed
                               : parse_mechanism(cfg.mechanism);
}

void check_flags(const RunConfig& cfg) {
  const Mechanism m = selected(cfg);
  const bool per_mechanism = cfg.command == "clear" || cfg.command == "verify";
  if (per_mechanism && cfg.delta != "auto" && m != Mechanism::kProposed) {
    throw InputError("--delta applies only to the proposed mechanism");
  }
  if (per_mechanism && cfg.t2_flags_given && m != Mechanism::kT2) {
    throw InputError("--t2-* options apply only to the t2 mechanism");
  }
  if (cfg.jobs < 1) throw InputError("--jobs must be at least 1");
  cfg.t2.validate();
}

MarketOutcome run_selected(const MarketCase& c, const RunConfig& cfg) {
  const Mechanism m = selected(cfg);
  if (m == Mechanism::kProposed) return run_proposed(c, parse_delta(cfg.delta));
  return run_mechanism(c, m, cfg.t2);
}

std::vector<double> grid_points(double from, double to, double step) {
  if (!(step > 0.0) || !(to >= from)) {
    throw InputError("sweep range needs step > 0 and to >= from");
  }
  const auto n = static_cast<long>(std::ceil((to - from) / step - 1e-9));
  std::vector<double> pts;
  for (long k = 0; k < n; ++k) pts.push_back(from + static_cast<double>(k) * step);
  pts.push_back(to);
  return pts;
}

json to_json(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

int cmd_clear(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const MarketCase c = load_case(cfg.case_path);
  const MarketOutcome o = run_selected(c, cfg);
  if (cfg.json) {
    write_outcome_json(c, o, out);
  } else {
    write_outcome_csv(c, o, out);
  }
  const double k = c.display_scale;
  err << to_string(o.mechanism);
  if (!std::isnan(o.delta)) err << " delta=" << o.delta;
  err << " subsidy=" << k * o.subsidy << " welfare=" << k * o.welfare;
  if (!o.converged) err << " (not converged)";
  if (o.curtailed) err << " (curtailed)";
  err << '\n';
  return kOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const MarketCase c = load_case(cfg.case_path);
  const ComparisonReport rep = compare_mechanisms(c, cfg.t2, parse_delta(cfg.delta));
  if (cfg.json) {
    write_comparison_json(rep, out);
  } else {
    write_comparison_csv(rep, out);
  }
  int code = kOk;
  for (const ComparisonRow& r : rep.rows) {
    if (r.error.empty()) continue;
    err << r.mechanism << ": " << r.error << '\n';
    code = kSolverError;
  }
  return code;
}

int cmd_sweep_delta(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const MarketCase c = load_case(cfg.case_path);
  const auto rows = sweep_delta(c, cfg.delta_step, cfg.jobs);
  if (cfg.json) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"delta", r.delta},
                     {"eta", r.eta},
                     {"delta_s", r.delta_s * c.display_scale}});
    }
    out << arr.dump(2) << '\n';
  } else {
    write_delta_sweep_csv(rows, c.display_scale, out);
  }
  return kOk;
}

int cmd_sweep_capacity(const RunConfig& cfg, std::ostream& out,
                       std::ostream&) {
  const MarketCase c = load_case(cfg.case_path);
  const auto rows = sweep_capacity(c, cfg.factor_from, cfg.factor_to,
                                   cfg.factor_step, cfg.t2, cfg.jobs);
  if (cfg.json) {
    const double k = c.display_scale;
    json arr = json::array();
    for (const auto& r : rows) {
      json row;
      row["factor"] = r.factor;
      row["social_optimum"] = to_json(k * r.social_optimum);
      for (std::size_t m = 0; m < 4; ++m) {
        row[to_string(kAll[m])] = to_json(k * r.welfare[m]);
      }
      arr.push_back(row);
    }
    out << arr.dump(2) << '\n';
  } else {
    write_capacity_sweep_csv(rows, c.display_scale, out);
  }
  return kOk;
}

PropertyReport verify_case(const MarketCase& c, const RunConfig& cfg) {
  const MarketOutcome o = run_selected(c, cfg);
  PropertyReport rep = run_property_suite(c, o);
  if (selected(cfg) == Mechanism::kProposed) {
    const MarketClearing mc(c);
    if (mc.solve(0.0).eta > DeltaSearchOptions{}.eta_zero_tol) {
      std::vector<double> samples;
      for (int k = 1; k <= 9; ++k) samples.push_back(0.1 * k);
      rep.append(check_lemma_linearity(c, samples));
    }
  }
  return rep;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  PropertyReport total;
  total.subject = to_string(selected(cfg));
  if (cfg.random_cases > 0) {
    const auto n = static_cast<std::size_t>(cfg.random_cases);
    std::vector<PropertyReport> reps(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
      reps[i] = verify_case(random_case(cfg.seed + i, cfg.sizes, cfg.ranges), cfg);
    });
    // one line per property, witnesses tagged with their case
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tag = "random-" + std::to_string(cfg.seed + i) + "/";
      for (const PropertyResult& r : reps[i].properties) {
        auto it = std::find_if(
            total.properties.begin(), total.properties.end(),
            [&](const PropertyResult& t) { return t.name == r.name; });
        if (it == total.properties.end()) {
          total.properties.push_back({r.name, r.tolerance, {}});
          it = std::prev(total.properties.end());
        }
        for (const Witness& w : r.witnesses) {
          it->witnesses.push_back({tag + w.agent, w.magnitude});
        }
      }
    }
  } else {
    total.append(verify_case(load_case(cfg.case_path), cfg));
  }
  if (cfg.json) {
    write_property_report_json(total, out);
  } else {
    write_property_report_csv(total, out);
  }
  if (total.passed()) return kOk;
  for (const PropertyResult& r : total.properties) {
    if (!r.passed()) {
      err << r.name << " failed with " << r.witnesses.size() << " witness"
          << (r.witnesses.size() == 1 ? "" : "es") << '\n';
    }
  }
  return kPropertyFailure;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  MarketCase c = random_case(cfg.seed, cfg.sizes, cfg.ranges);
  if (!cfg.case_name.empty()) c.name = cfg.case_name;
  out << serialize_case(c);
  return kOk;
}

}  // namespace

ComparisonReport compare_mechanisms(const MarketCase& c, const T2Options& t2,
                                    DeltaMode delta) {
  ComparisonReport rep;
  rep.case_name = c.name;
  rep.display_scale = c.display_scale;
  for (Mechanism m : kAll) {
    try {
      rep.rows.push_back(summarize(m == Mechanism::kProposed
                                       ? run_proposed(c, delta)
                                       : run_mechanism(c, m, t2)));
    } catch (const Error& e) {
      ComparisonRow row;
      row.mechanism = to_string(m);
      row.error = e.what();
      rep.rows.push_back(row);
    }
  }
  return rep;
}

std::vector<DeltaSweepRow> sweep_delta(const MarketCase& c, double step,
                                       int jobs) {
  if (!(step > 0.0 && step <= 1.0)) throw InputError("--step must lie in (0, 1]");
  const MarketClearing mc(c);
  const auto pts = grid_points(0.0, 1.0, step);
  std::vector<DeltaSweepRow> rows(pts.size());
  parallel_for(pts.size(), jobs, [&](std::size_t i) {
    const auto s = mc.solve(pts[i]);
    rows[i] = {pts[i], s.eta, balance_gap(s, c)};
  });
  return rows;
}

std::vector<CapacitySweepRow> sweep_capacity(const MarketCase& c, double from,
                                             double to, double step,
                                             const T2Options& t2, int jobs) {
  if (!(from > 0.0)) throw InputError("capacity factors must be positive");
  const auto pts = grid_points(from, to, step);
  std::vector<CapacitySweepRow> rows(pts.size());
  parallel_for(pts.size(), jobs, [&](std::size_t i) {
    const MarketCase scaled = scale_line_capacities(c, pts[i]);
    CapacitySweepRow& r = rows[i];
    r.factor = pts[i];
    r.social_optimum = solve_social_optimum(scaled).welfare;
    for (std::size_t m = 0; m < 4; ++m) {
      try {
        r.welfare[m] = run_mechanism(scaled, kAll[m], t2).welfare;
      } catch (const SolverError&) {
        r.welfare[m] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  });
  return rows;
}

void write_delta_sweep_csv(const std::vector<DeltaSweepRow>& rows,
                           double display_scale, std::ostream& out) {
  const auto old_precision = out.precision();
  out << std::setprecision(10) << "delta,eta,delta_s\n";
  for (const auto& r : rows) {
    out << r.delta << ',' << r.eta << ',' << r.delta_s * display_scale << '\n';
  }
  out.precision(old_precision);
}

void write_capacity_sweep_csv(const std::vector<CapacitySweepRow>& rows,
                              double display_scale, std::ostream& out) {
  const auto old_precision = out.precision();
  out << std::setprecision(10) << "factor,social_optimum";
  for (Mechanism m : kAll) out << ',' << to_string(m);
  out << '\n';
  for (const auto& r : rows) {
    out << r.factor << ',' << r.social_optimum * display_scale;
    for (double w : r.welfare) {
      out << ',';
      if (std::isfinite(w)) out << w * display_scale;
    }
    out << '\n';
  }
  out.precision(old_precision);
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    check_flags(cfg);
    std::ofstream file;
    std::ostream* sink = &out;
    if (!cfg.output_path.empty()) {
      file.open(cfg.output_path);
      if (!file) throw InputError("cannot write " + cfg.output_path);
      sink = &file;
    }
    if (cfg.command == "clear") return cmd_clear(cfg, *sink, err);
    if (cfg.command == "compare") return cmd_compare(cfg, *sink, err);
    if (cfg.command == "sweep-delta") return cmd_sweep_delta(cfg, *sink, err);
    if (cfg.command == "sweep-capacity") {
      return cmd_sweep_capacity(cfg, *sink, err);
    }
    if (cfg.command == "verify") return cmd_verify(cfg, *sink, err);
    if (cfg.command == "generate") return cmd_generate(cfg, *sink, err);
    throw InputError("unknown command '" + cfg.command + "'");
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kSolverError;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Carbon-aware electricity market clearing"};
  app.require_subcommand(1);

  auto add_case = [&](CLI::App* sub) {
    sub->add_option("--case", cfg.case_path, "case file (schema v1)")
        ->required();
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_flag("--json", cfg.json, "structured output instead of CSV");
    sub->add_option("-o,--output", cfg.output_path, "write the report here");
  };
  auto add_t2 = [&](CLI::App* sub) {
    auto mark = [&](auto) { cfg.t2_flags_given = true; };
    sub->add_option("--t2-max-iterations", cfg.t2.max_iterations)
        ->each(mark);
    sub->add_option("--t2-damping", cfg.t2.damping)->each(mark);
    sub->add_option("--t2-tolerance", cfg.t2.tolerance)->each(mark);
    sub->add_flag("--t2-generator-carbon-price", cfg.t2.generator_carbon_price)
        ->each(mark);
    sub->add_flag("--t2-generator-carbon-tax", cfg.t2.generator_carbon_tax)
        ->each(mark);
  };
  auto add_jobs = [&](CLI::App* sub) {
    sub->add_option("-j,--jobs", cfg.jobs, "worker threads");
  };
  auto add_mechanism = [&](CLI::App* sub) {
    sub->add_option("-m,--mechanism", cfg.mechanism,
                    "traditional, t1, t2 or proposed");
    sub->add_option("--delta", cfg.delta, "auto or a value in [0, 1]");
  };

  auto* clear = app.add_subcommand("clear", "clear one case");
  add_case(clear);
  add_common(clear);
  add_mechanism(clear);
  add_t2(clear);

  auto* compare = app.add_subcommand("compare", "all mechanisms on one case");
  add_case(compare);
  add_common(compare);
  compare->add_option("--delta", cfg.delta, "delta for the proposed row");
  add_t2(compare);

  auto* sweep_d = app.add_subcommand("sweep-delta", "eta and balance gap over delta");
  add_case(sweep_d);
  add_common(sweep_d);
  add_jobs(sweep_d);
  sweep_d->add_option("--step", cfg.delta_step);

  auto* sweep_c = app.add_subcommand("sweep-capacity",
                                     "welfare per mechanism over line limits");
  add_case(sweep_c);
  add_common(sweep_c);
  add_jobs(sweep_c);
  add_t2(sweep_c);
  sweep_c->add_option("--from", cfg.factor_from);
  sweep_c->add_option("--to", cfg.factor_to);
  sweep_c->add_option("--step", cfg.factor_step);

  auto add_generator = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--buses", cfg.sizes.buses);
    sub->add_option("--generators", cfg.sizes.generators);
    sub->add_option("--loads", cfg.sizes.loads);
    sub->add_option("--extra-lines", cfg.sizes.extra_lines);
    sub->add_option("--monitored-lines", cfg.sizes.monitored_lines,
                    "lines that keep a finite limit (default all)");
    auto range = [&](const char* flag, Range& r) {
      sub->add_option_function<std::vector<double>>(
             flag,
             [&r](const std::vector<double>& v) {
               r.lo = v[0];
               r.hi = v[1];
             },
             "LO HI")
          ->expected(2);
    };
    range("--cost", cfg.ranges.cost);
    range("--emission", cfg.ranges.emission);
    range("--generator-capacity", cfg.ranges.generator_capacity);
    range("--utility", cfg.ranges.utility);
    range("--load-capacity", cfg.ranges.load_capacity);
    range("--carbon-price", cfg.ranges.carbon_price);
    range("--susceptance", cfg.ranges.susceptance);
    range("--line-capacity", cfg.ranges.line_capacity);
  };

  auto* verify = app.add_subcommand("verify", "run the property suite");
  verify->add_option("--case", cfg.case_path, "case file (schema v1)");
  verify->add_option("--random", cfg.random_cases,
                     "check this many seeded random cases instead");
  add_common(verify);
  add_mechanism(verify);
  add_t2(verify);
  add_jobs(verify);
  add_generator(verify);

  auto* generate = app.add_subcommand("generate", "write a seeded random case");
  add_generator(generate);
  generate->add_option("--name", cfg.case_name);
  generate->add_option("-o,--output", cfg.output_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (cfg.command == "verify" && cfg.case_path.empty() && cfg.random_cases <= 0) {
    err << "error: verify needs --case or --random\n";
    return kInputError;
  }
  // one bus means copper plate, anything larger gets a network
  cfg.sizes.copper_plate = cfg.sizes.buses == 1;
  return execute(cfg, out, err);
}

}  // namespace carbonmkt::cli
