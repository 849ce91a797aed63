#include "carbonmkt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

bool Line::monitored() const { return std::isfinite(capacity); }

bool Network::has_bus(int id) const {
  return std::find(buses.begin(), buses.end(), id) != buses.end();
}

std::size_t Network::bus_index(int id) const {
  const auto it = std::find(buses.begin(), buses.end(), id);
  if (it == buses.end()) {
    throw InvariantViolation("bus", "bus " + std::to_string(id) +
                                        " does not exist");
  }
  return static_cast<std::size_t>(it - buses.begin());
}

void Network::validate() const {
  if (buses.empty()) throw InvariantViolation("network.buses", "no buses");
  std::set<int> seen;
  for (int b : buses) {
    if (!seen.insert(b).second) {
      throw InvariantViolation("network.buses",
                               "duplicate bus " + std::to_string(b));
    }
  }
  if (!has_bus(slack)) {
    throw InvariantViolation("network.slack", "slack bus " +
                                                  std::to_string(slack) +
                                                  " does not exist");
  }
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const Line& line = lines[l];
    const std::string field = "network.lines[" + std::to_string(l) + "]";
    if (!has_bus(line.from) || !has_bus(line.to)) {
      throw InvariantViolation(field, "endpoint bus does not exist");
    }
    if (line.from == line.to) {
      throw InvariantViolation(field, "from and to buses coincide");
    }
    if (!(line.susceptance > 0.0) || !std::isfinite(line.susceptance)) {
      throw InvariantViolation(field + ".susceptance", "must be positive");
    }
    if (!(line.capacity >= 0.0)) {
      throw InvariantViolation(field + ".capacity", "must be nonnegative");
    }
  }
  if (copper_plate) return;

  // union-find connectivity
  std::vector<std::size_t> parent(buses.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Line& line : lines) {
    parent[find(bus_index(line.from))] = find(bus_index(line.to));
  }
  const std::size_t root = find(0);
  for (std::size_t b = 1; b < buses.size(); ++b) {
    if (find(b) != root) {
      throw DisconnectedNetwork("bus " + std::to_string(buses[b]) +
                                " is not connected to bus " +
                                std::to_string(buses[0]));
    }
  }
}

std::vector<double> PtdfMatrix::flows(std::span<const double> injection) const {
  std::vector<double> out(lines_, 0.0);
  for (std::size_t l = 0; l < lines_; ++l) {
    double f = 0.0;
    for (std::size_t b = 0; b < buses_; ++b) f += (*this)(l, b) * injection[b];
    out[l] = f;
  }
  return out;
}

PtdfMatrix compute_ptdf(const Network& network) {
  if (network.copper_plate) {
    throw InputError("PTDF is undefined for a copper-plate network");
  }
  network.validate();
  const std::size_t nb = network.buses.size();
  const std::size_t nl = network.lines.size();
  const std::size_t slack = network.bus_index(network.slack);

  // reduced nodal susceptance matrix, slack row/column removed
  auto reduced = [slack](std::size_t b) { return b < slack ? b : b - 1; };
  Eigen::MatrixXd Bred = Eigen::MatrixXd::Zero(
      static_cast<long>(nb - 1), static_cast<long>(nb - 1));
  for (const Line& line : network.lines) {
    const std::size_t f = network.bus_index(line.from);
    const std::size_t t = network.bus_index(line.to);
    const double b = line.susceptance;
    if (f != slack) Bred(reduced(f), reduced(f)) += b;
    if (t != slack) Bred(reduced(t), reduced(t)) += b;
    if (f != slack && t != slack) {
      Bred(reduced(f), reduced(t)) -= b;
      Bred(reduced(t), reduced(f)) -= b;
    }
  }

  PtdfMatrix ptdf(nl, nb);
  if (nb == 1) return ptdf;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(Bred);
  if (lu.rank() < Bred.rows()) {
    throw SingularSusceptance("reduced susceptance matrix is singular");
  }
  // X = Bred^{-1}; angle response to a unit injection at each bus
  const Eigen::MatrixXd X = lu.inverse();
  for (std::size_t l = 0; l < nl; ++l) {
    const Line& line = network.lines[l];
    const std::size_t f = network.bus_index(line.from);
    const std::size_t t = network.bus_index(line.to);
    for (std::size_t b = 0; b < nb; ++b) {
      if (b == slack) continue;
      const double theta_f = f == slack ? 0.0 : X(reduced(f), reduced(b));
      const double theta_t = t == slack ? 0.0 : X(reduced(t), reduced(b));
      const double v = line.susceptance * (theta_f - theta_t);
      // radial branches leave pure roundoff behind
      ptdf(l, b) = std::abs(v) < 1e-12 ? 0.0 : v;
    }
  }
  return ptdf;
}

std::vector<double> bus_injections(std::size_t num_buses,
                                   std::span<const double> generation,
                                   std::span<const std::size_t> generator_bus,
                                   std::span<const double> demand,
                                   std::span<const std::size_t> load_bus) {
  std::vector<double> q(num_buses, 0.0);
  for (std::size_t i = 0; i < generation.size(); ++i) {
    q[generator_bus[i]] += generation[i];
  }
  for (std::size_t j = 0; j < demand.size(); ++j) q[load_bus[j]] -= demand[j];
  return q;
}

std::vector<double> line_flows(const PtdfMatrix& ptdf,
                               std::span<const double> generation,
                               std::span<const std::size_t> generator_bus,
                               std::span<const double> demand,
                               std::span<const std::size_t> load_bus) {
  const double supply =
      std::accumulate(generation.begin(), generation.end(), 0.0);
  const double consumption = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(supply - consumption) > 1e-6) {
    throw UnbalancedInjection("generation " + std::to_string(supply) +
                              " != demand " + std::to_string(consumption));
  }
  const auto q = bus_injections(ptdf.buses(), generation, generator_bus,
                                demand, load_bus);
  return ptdf.flows(q);
}

}  // namespace carbonmkt
