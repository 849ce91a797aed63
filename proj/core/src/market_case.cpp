#include "carbonmkt/market_case.hpp"

#include <cmath>
#include <string>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

namespace {

void require_bound(const std::string& field, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvariantViolation(field, "must be finite and nonnegative");
  }
}

void require_real(const std::string& field, double v) {
  if (!std::isfinite(v)) throw InvariantViolation(field, "must be finite");
}

}  // namespace

void MarketCase::validate() const {
  network.validate();
  if (generators.empty()) {
    throw InvariantViolation("generators", "no supply: generator list is empty");
  }
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const Generator& g = generators[i];
    const std::string f = "generators[" + std::to_string(i) + "]";
    if (!network.has_bus(g.bus)) {
      throw InvariantViolation(f + ".bus", "bus " + std::to_string(g.bus) +
                                               " does not exist");
    }
    require_real(f + ".cost", g.cost);
    require_bound(f + ".emission", g.emission);
    require_bound(f + ".capacity", g.capacity);
  }
  for (std::size_t j = 0; j < loads.size(); ++j) {
    const Load& d = loads[j];
    const std::string f = "loads[" + std::to_string(j) + "]";
    if (!network.has_bus(d.bus)) {
      throw InvariantViolation(f + ".bus", "bus " + std::to_string(d.bus) +
                                               " does not exist");
    }
    require_real(f + ".utility", d.utility);
    require_bound(f + ".capacity", d.capacity);
  }
  require_bound("market.carbon_price", carbon_price);
  if (!(display_scale > 0.0) || !std::isfinite(display_scale)) {
    throw InvariantViolation("market.display_scale", "must be positive");
  }
}

std::vector<std::size_t> MarketCase::generator_buses() const {
  std::vector<std::size_t> out;
  out.reserve(generators.size());
  for (const auto& g : generators) out.push_back(network.bus_index(g.bus));
  return out;
}

std::vector<std::size_t> MarketCase::load_buses() const {
  std::vector<std::size_t> out;
  out.reserve(loads.size());
  for (const auto& d : loads) out.push_back(network.bus_index(d.bus));
  return out;
}

bool operator==(const Line& a, const Line& b) {
  return a.from == b.from && a.to == b.to && a.susceptance == b.susceptance &&
         a.capacity == b.capacity;
}

bool operator==(const Network& a, const Network& b) {
  return a.buses == b.buses && a.lines == b.lines && a.slack == b.slack &&
         a.copper_plate == b.copper_plate;
}

bool operator==(const MarketCase& a, const MarketCase& b) {
  return a.name == b.name && a.network == b.network &&
         a.generators == b.generators && a.loads == b.loads &&
         a.carbon_price == b.carbon_price &&
         a.display_scale == b.display_scale;
}

MarketCase scale_line_capacities(const MarketCase& base, double factor) {
  if (!(factor >= 0.0)) {
    throw InputError("capacity factor must be nonnegative");
  }
  MarketCase out = base;
  for (Line& line : out.network.lines) {
    if (line.monitored()) line.capacity *= factor;
  }
  return out;
}

}  // namespace carbonmkt
