#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "carbonmkt/grid.hpp"

namespace carbonmkt {

struct Generator {
  std::string name;
  int bus = 0;
  double cost = 0.0;      // c_i, $/energy
  double emission = 0.0;  // e_i, mass/energy
  double capacity = 0.0;  // maximum output

  /// c_i + kappa * e_i
  double carbon_cost(double carbon_price) const {
    return cost + carbon_price * emission;
  }
  bool operator==(const Generator&) const = default;
};

struct Load {
  std::string name;
  int bus = 0;
  double utility = 0.0;   // b_j, $/energy
  double capacity = 0.0;  // maximum consumption
  bool operator==(const Load&) const = default;
};

/// A complete clearing instance: network, bids and the carbon price kappa.
struct MarketCase {
  std::string name;
  Network network;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  double carbon_price = 0.0;
  /// Multiplier applied to monetary report columns only.
  double display_scale = 1.0;

  /// Throws InvariantViolation naming the offending field.
  void validate() const;

  std::vector<std::size_t> generator_buses() const;
  std::vector<std::size_t> load_buses() const;
};

bool operator==(const Line& a, const Line& b);
bool operator==(const Network& a, const Network& b);
bool operator==(const MarketCase& a, const MarketCase& b);

/// Line capacities multiplied by `factor` (unmonitored lines untouched).
MarketCase scale_line_capacities(const MarketCase& base, double factor);

}  // namespace carbonmkt
