#include "carbonmkt/cef.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "carbonmkt/errors.hpp"

namespace carbonmkt {

NciResult compute_nci(const MarketCase& c, std::span<const double> p,
                      std::span<const double> d, std::span<const double> flows,
                      const NciOptions& opts) {
  const double supply = std::accumulate(p.begin(), p.end(), 0.0);
  const double demand = std::accumulate(d.begin(), d.end(), 0.0);
  if (std::abs(supply - demand) > 1e-6) {
    throw UnbalancedInjection("generation " + std::to_string(supply) +
                              " != demand " + std::to_string(demand));
  }
  const Network& net = c.network;
  const std::size_t nb = net.buses.size();
  const auto gen_bus = c.generator_buses();
  const auto load_bus = c.load_buses();

  NciResult out;
  out.flows.assign(flows.begin(), flows.end());

  if (net.copper_plate) {
    double emitted = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      emitted += c.generators[i].emission * p[i];
    }
    const double avg = supply > 0.0 ? emitted / supply : 0.0;
    out.rho.assign(nb, avg);
    out.inflow.assign(nb, supply);
  } else {
    if (flows.size() != net.lines.size()) {
      throw InputError("flow vector does not match the line list");
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<long>(nb),
                                              static_cast<long>(nb));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<long>(nb));
    std::vector<double> inflow(nb, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      inflow[gen_bus[i]] += p[i];
      rhs[static_cast<long>(gen_bus[i])] += c.generators[i].emission * p[i];
    }
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
      const double f = flows[l];
      if (std::abs(f) <= opts.zero_flow) continue;
      const std::size_t from = net.bus_index(net.lines[l].from);
      const std::size_t to = net.bus_index(net.lines[l].to);
      const std::size_t src = f > 0.0 ? from : to;
      const std::size_t dst = f > 0.0 ? to : from;
      inflow[dst] += std::abs(f);
      a(static_cast<long>(dst), static_cast<long>(src)) -= std::abs(f);
    }
    for (std::size_t n = 0; n < nb; ++n) {
      const long k = static_cast<long>(n);
      if (inflow[n] > 0.0) {
        a(k, k) += inflow[n];
      } else {
        // no inflow: pin rho to zero
        a.row(k).setZero();
        a(k, k) = 1.0;
        rhs[k] = 0.0;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < a.rows()) {
      if (!(opts.regularization > 0.0)) {
        throw SingularSharingSystem(
            "proportional sharing system is singular (directed flow cycle)");
      }
      a.diagonal().array() += opts.regularization;
      lu.compute(a);
      out.regularized = true;
    }
    const Eigen::VectorXd rho = lu.solve(rhs);
    out.inflow = std::move(inflow);
    out.rho.resize(nb);
    for (std::size_t n = 0; n < nb; ++n) {
      out.rho[n] = std::max(0.0, rho[static_cast<long>(n)]);
    }
  }
  for (std::size_t j = 0; j < d.size(); ++j) {
    out.sigma_load.push_back(out.rho[load_bus[j]]);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.sigma_generator.push_back(out.rho[gen_bus[i]]);
  }
  return out;
}

}  // namespace carbonmkt
