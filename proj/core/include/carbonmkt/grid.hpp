#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace carbonmkt {

struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 1.0;  // per unit, > 0
  double capacity = 0.0;     // +inf when unmonitored

  bool monitored() const;
};

/// DC network. Flow on a line is positive in the `from -> to` direction.
struct Network {
  std::vector<int> buses;
  std::vector<Line> lines;
  int slack = 0;
  bool copper_plate = false;

  /// Position of bus `id` in `buses`; throws InvariantViolation if absent.
  std::size_t bus_index(int id) const;
  bool has_bus(int id) const;
  /// Structural checks: unique buses, slack present, valid lines, connected.
  void validate() const;
};

/// Injection-to-flow sensitivities, lines x buses, slack column zero.
class PtdfMatrix {
 public:
  PtdfMatrix() = default;
  PtdfMatrix(std::size_t lines, std::size_t buses)
      : lines_(lines), buses_(buses), data_(lines * buses, 0.0) {}

  std::size_t lines() const { return lines_; }
  std::size_t buses() const { return buses_; }
  double operator()(std::size_t line, std::size_t bus) const {
    return data_[line * buses_ + bus];
  }
  double& operator()(std::size_t line, std::size_t bus) {
    return data_[line * buses_ + bus];
  }
  /// Flows for a bus injection vector (generation positive).
  std::vector<double> flows(std::span<const double> injection) const;

 private:
  std::size_t lines_ = 0;
  std::size_t buses_ = 0;
  std::vector<double> data_;
};

/// Reduced-susceptance PTDF. Throws DisconnectedNetwork or
/// SingularSusceptance; copper-plate networks are rejected with InputError.
PtdfMatrix compute_ptdf(const Network& network);

/// Net injection at each bus from sited generation and demand.
std::vector<double> bus_injections(std::size_t num_buses,
                                   std::span<const double> generation,
                                   std::span<const std::size_t> generator_bus,
                                   std::span<const double> demand,
                                   std::span<const std::size_t> load_bus);

/// sum_i pi_il p_i - sum_j pi_jl d_j for each line. Siting maps hold bus
/// positions (not ids). Throws UnbalancedInjection when |sum p - sum d| > 1e-6.
std::vector<double> line_flows(const PtdfMatrix& ptdf,
                               std::span<const double> generation,
                               std::span<const std::size_t> generator_bus,
                               std::span<const double> demand,
                               std::span<const std::size_t> load_bus);

}  // namespace carbonmkt
