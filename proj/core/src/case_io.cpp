#include "carbonmkt/case_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void schema_error(const std::string& field,
                               const std::string& what) {
  throw CaseParseError(field + ": " + what, 0, field);
}

/// Rejects keys outside `allowed`.
void check_keys(const json& obj, const std::string& field,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) schema_error(field, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) schema_error(field.empty() ? key : field + "." + key,
                          "unknown field");
  }
}

const json& member(const json& obj, const std::string& field,
                   const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    schema_error(field.empty() ? key : field + "." + key, "missing field");
  }
  return *it;
}

double get_number(const json& obj, const std::string& field, const char* key) {
  const json& v = member(obj, field, key);
  if (!v.is_number()) schema_error(field + "." + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& field, const char* key) {
  const json& v = member(obj, field, key);
  if (!v.is_number_integer()) {
    schema_error(field + "." + key, "expected an integer");
  }
  return v.get<int>();
}

std::string get_name(const json& obj, const std::string& field,
                     std::string fallback) {
  const auto it = obj.find("name");
  if (it == obj.end()) return fallback;
  if (!it->is_string()) schema_error(field + ".name", "expected a string");
  return it->get<std::string>();
}

const json& get_array(const json& obj, const std::string& field,
                      const char* key) {
  const json& v = member(obj, field, key);
  if (!v.is_array()) {
    schema_error(field.empty() ? key : field + "." + key, "expected an array");
  }
  return v;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t k = 0; k < offset && k < text.size(); ++k) {
    if (text[k] == '\n') ++line;
  }
  return line;
}

Network parse_network(const json& j) {
  const std::string f = "network";
  check_keys(j, f, {"copper_plate", "slack", "buses", "lines"});
  Network net;
  const json& cp = member(j, f, "copper_plate");
  if (!cp.is_boolean()) schema_error(f + ".copper_plate", "expected a boolean");
  net.copper_plate = cp.get<bool>();
  net.slack = get_int(j, f, "slack");
  const json& buses = get_array(j, f, "buses");
  for (std::size_t k = 0; k < buses.size(); ++k) {
    if (!buses[k].is_number_integer()) {
      schema_error(f + ".buses[" + std::to_string(k) + "]",
                   "expected an integer");
    }
    net.buses.push_back(buses[k].get<int>());
  }
  const auto lines_it = j.find("lines");
  if (lines_it != j.end()) {
    if (!lines_it->is_array()) schema_error(f + ".lines", "expected an array");
    for (std::size_t l = 0; l < lines_it->size(); ++l) {
      const json& lj = (*lines_it)[l];
      const std::string lf = f + ".lines[" + std::to_string(l) + "]";
      check_keys(lj, lf, {"from", "to", "susceptance", "capacity"});
      Line line;
      line.from = get_int(lj, lf, "from");
      line.to = get_int(lj, lf, "to");
      line.susceptance = get_number(lj, lf, "susceptance");
      const json& cap = member(lj, lf, "capacity");
      if (cap.is_null()) {
        line.capacity = kInf;
      } else if (cap.is_number()) {
        line.capacity = cap.get<double>();
      } else {
        schema_error(lf + ".capacity", "expected a number or null");
      }
      net.lines.push_back(line);
    }
  }
  return net;
}

MarketCase from_json(const json& root) {
  check_keys(root, "",
             {"schema", "name", "network", "generators", "loads", "market"});
  const json& schema = member(root, "", "schema");
  if (!schema.is_string() || schema.get<std::string>() != kCaseSchema) {
    schema_error("schema", "unsupported schema (expected \"" +
                               std::string(kCaseSchema) + "\")");
  }
  MarketCase c;
  c.name = get_name(root, "", "");
  c.network = parse_network(member(root, "", "network"));

  const json& gens = get_array(root, "", "generators");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string f = "generators[" + std::to_string(i) + "]";
    check_keys(gens[i], f, {"name", "bus", "cost", "emission", "capacity"});
    Generator g;
    g.name = get_name(gens[i], f, "G" + std::to_string(i + 1));
    g.bus = get_int(gens[i], f, "bus");
    g.cost = get_number(gens[i], f, "cost");
    g.emission = get_number(gens[i], f, "emission");
    g.capacity = get_number(gens[i], f, "capacity");
    c.generators.push_back(std::move(g));
  }
  const json& loads = get_array(root, "", "loads");
  for (std::size_t j = 0; j < loads.size(); ++j) {
    const std::string f = "loads[" + std::to_string(j) + "]";
    check_keys(loads[j], f, {"name", "bus", "utility", "capacity"});
    Load d;
    d.name = get_name(loads[j], f, "L" + std::to_string(j + 1));
    d.bus = get_int(loads[j], f, "bus");
    d.utility = get_number(loads[j], f, "utility");
    d.capacity = get_number(loads[j], f, "capacity");
    c.loads.push_back(std::move(d));
  }
  const json& market = member(root, "", "market");
  check_keys(market, "market", {"carbon_price", "display_scale"});
  c.carbon_price = get_number(market, "market", "carbon_price");
  if (market.contains("display_scale")) {
    c.display_scale = get_number(market, "market", "display_scale");
  }
  c.validate();
  return c;
}

json to_json(const MarketCase& c) {
  json net;
  net["copper_plate"] = c.network.copper_plate;
  net["slack"] = c.network.slack;
  net["buses"] = c.network.buses;
  json lines = json::array();
  for (const Line& l : c.network.lines) {
    json lj;
    lj["from"] = l.from;
    lj["to"] = l.to;
    lj["susceptance"] = l.susceptance;
    lj["capacity"] = l.monitored() ? json(l.capacity) : json(nullptr);
    lines.push_back(std::move(lj));
  }
  net["lines"] = std::move(lines);

  json gens = json::array();
  for (const Generator& g : c.generators) {
    gens.push_back({{"name", g.name},
                    {"bus", g.bus},
                    {"cost", g.cost},
                    {"emission", g.emission},
                    {"capacity", g.capacity}});
  }
  json loads = json::array();
  for (const Load& d : c.loads) {
    loads.push_back({{"name", d.name},
                     {"bus", d.bus},
                     {"utility", d.utility},
                     {"capacity", d.capacity}});
  }
  json root;
  root["schema"] = std::string(kCaseSchema);
  root["name"] = c.name;
  root["network"] = std::move(net);
  root["generators"] = std::move(gens);
  root["loads"] = std::move(loads);
  root["market"] = {{"carbon_price", c.carbon_price},
                    {"display_scale", c.display_scale}};
  return root;
}

/// Uniform in [lo, hi] from the top 53 bits; independent of the standard
/// library's distribution implementations.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : gen_(seed) {}
  double uniform(Range r) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return r.lo + (r.hi - r.lo) * u;
  }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

 private:
  std::mt19937_64 gen_;
};

void check_range(const char* name, Range r) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo < 0.0 ||
      r.hi < r.lo) {
    throw InputError(std::string("random case range ") + name +
                     " must satisfy 0 <= lo <= hi");
  }
}

}  // namespace

MarketCase parse_case(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const int line = line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw CaseParseError("line " + std::to_string(line) + ": " + e.what(),
                         line, "");
  }
  return from_json(root);
}

MarketCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open case file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

std::string serialize_case(const MarketCase& c) {
  return to_json(c).dump(2) + "\n";
}

void save_case(const MarketCase& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write case file " + path.string());
  out << serialize_case(c);
}

MarketCase bundled_simple_system() {
  MarketCase c;
  c.name = "simple";
  c.network.buses = {1};
  c.network.slack = 1;
  c.network.copper_plate = true;
  const double cost[] = {0.472, 0.480, 0.502, 0.473, 0.492, 0.512};
  const double emission[] = {0.9, 0.8, 0.8, 0.2, 0.3, 0.3};
  const double pmax[] = {800, 800, 500, 550, 300, 400};
  for (int i = 0; i < 6; ++i) {
    c.generators.push_back(
        {"G" + std::to_string(i + 1), 1, cost[i], emission[i], pmax[i]});
  }
  const double utility[] = {0.78, 0.78, 0.85, 0.67, 0.85, 0.73, 0.75, 0.84};
  const double dmax[] = {350, 340, 420, 500, 200, 330, 280, 250};
  for (int j = 0; j < 8; ++j) {
    c.loads.push_back({"L" + std::to_string(j + 1), 1, utility[j], dmax[j]});
  }
  c.carbon_price = 0.07;
  c.display_scale = 1000.0;
  return c;
}

MarketCase random_case(std::uint64_t seed, const RandomCaseSizes& sizes,
                       const RandomCaseRanges& ranges) {
  if (sizes.buses < 1 || sizes.generators < 1 || sizes.loads < 0 ||
      sizes.extra_lines < 0) {
    throw InputError("random case sizes must be positive");
  }
  check_range("cost", ranges.cost);
  check_range("emission", ranges.emission);
  check_range("generator_capacity", ranges.generator_capacity);
  check_range("utility", ranges.utility);
  check_range("load_capacity", ranges.load_capacity);
  check_range("carbon_price", ranges.carbon_price);
  check_range("susceptance", ranges.susceptance);
  check_range("line_capacity", ranges.line_capacity);
  if (!(ranges.susceptance.lo > 0.0)) {
    throw InputError("random case susceptance must be positive");
  }

  Draw draw(seed);
  MarketCase c;
  c.name = "random-" + std::to_string(seed);
  const bool copper = sizes.copper_plate || sizes.buses == 1;
  c.network.copper_plate = copper;
  const std::size_t nb = copper ? 1 : static_cast<std::size_t>(sizes.buses);
  for (std::size_t b = 0; b < nb; ++b) {
    c.network.buses.push_back(static_cast<int>(b + 1));
  }
  c.network.slack = 1;
  if (!copper) {
    std::set<std::pair<int, int>> used;
    auto add = [&](int a, int b) {
      used.insert({std::min(a, b), std::max(a, b)});
      c.network.lines.push_back({a, b, draw.uniform(ranges.susceptance),
                                 draw.uniform(ranges.line_capacity)});
    };
    // spanning tree first, so every case is connected
    for (std::size_t b = 1; b < nb; ++b) {
      add(static_cast<int>(draw.index(b) + 1), static_cast<int>(b + 1));
    }
    const std::size_t max_pairs = nb * (nb - 1) / 2;
    for (int k = 0; k < sizes.extra_lines && used.size() < max_pairs; ++k) {
      int a = 0;
      int b = 0;
      do {
        a = static_cast<int>(draw.index(nb) + 1);
        b = static_cast<int>(draw.index(nb) + 1);
      } while (a == b || used.count({std::min(a, b), std::max(a, b)}) != 0);
      add(a, b);
    }
  }
  for (int i = 0; i < sizes.generators; ++i) {
    Generator g;
    g.name = "G" + std::to_string(i + 1);
    g.bus = static_cast<int>(draw.index(nb) + 1);
    g.cost = draw.uniform(ranges.cost);
    g.emission = draw.uniform(ranges.emission);
    g.capacity = draw.uniform(ranges.generator_capacity);
    c.generators.push_back(std::move(g));
  }
  for (int j = 0; j < sizes.loads; ++j) {
    Load d;
    d.name = "L" + std::to_string(j + 1);
    d.bus = static_cast<int>(draw.index(nb) + 1);
    d.utility = draw.uniform(ranges.utility);
    d.capacity = draw.uniform(ranges.load_capacity);
    c.loads.push_back(std::move(d));
  }
  c.carbon_price = draw.uniform(ranges.carbon_price);
  const auto nl = c.network.lines.size();
  if (sizes.monitored_lines >= 0 &&
      static_cast<std::size_t>(sizes.monitored_lines) < nl) {
    std::vector<std::size_t> order(nl);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < nl; ++k) {
      std::swap(order[k], order[k + draw.index(nl - k)]);
    }
    for (std::size_t k = static_cast<std::size_t>(sizes.monitored_lines);
         k < nl; ++k) {
      c.network.lines[order[k]].capacity =
          std::numeric_limits<double>::infinity();
    }
  }
  c.validate();
  return c;
}

namespace {

constexpr const char* kColumns[] = {
    "mechanism",     "generator_net_profit", "load_net_profit",
    "generator_revenue", "load_payment",     "carbon_tax",
    "subsidy",       "social_welfare"};

std::vector<double> monetary(const ComparisonRow& r) {
  return {r.generator_net_profit, r.load_net_profit, r.generator_revenue,
          r.load_payment,         r.carbon_tax,      r.subsidy,
          r.social_welfare};
}

}  // namespace

void write_comparison_csv(const ComparisonReport& report, std::ostream& out) {
  for (std::size_t k = 0; k < std::size(kColumns); ++k) {
    out << (k ? "," : "") << kColumns[k];
  }
  out << "\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(10);
  for (const ComparisonRow& r : report.rows) {
    out << r.mechanism;
    for (double v : monetary(r)) {
      out << ",";
      if (r.error.empty()) out << v * report.display_scale;
    }
    out << "\n";
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

void write_comparison_json(const ComparisonReport& report, std::ostream& out) {
  json rows = json::array();
  for (const ComparisonRow& r : report.rows) {
    json row;
    row["mechanism"] = r.mechanism;
    if (!r.error.empty()) {
      row["error"] = r.error;
    } else {
      const auto values = monetary(r);
      for (std::size_t k = 0; k < values.size(); ++k) {
        row[kColumns[k + 1]] = values[k] * report.display_scale;
      }
    }
    rows.push_back(std::move(row));
  }
  json root;
  root["case"] = report.case_name;
  root["display_scale"] = report.display_scale;
  root["rows"] = std::move(rows);
  out << root.dump(2) << "\n";
}

}  // namespace carbonmkt
