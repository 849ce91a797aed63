#pragma once

#include <span>
#include <vector>

#include "carbonmkt/market_case.hpp"

namespace carbonmkt {

struct NciOptions {
  /// lines carrying at most this much are left out of the sharing graph
  double zero_flow = 1e-9;
  /// on a singular sharing system, retry with this diagonal shift instead of
  /// throwing (0 disables)
  double regularization = 0.0;
};

struct NciResult {
  /// intensity per bus position
  std::vector<double> rho;
  /// local generation plus incoming flow per bus; rho is pinned to 0 where
  /// this is 0
  std::vector<double> inflow;
  std::vector<double> sigma_load;
  std::vector<double> sigma_generator;
  /// signed line flows that drove the sharing
  std::vector<double> flows;
  bool regularized = false;
};

/// Node carbon intensities by proportional sharing: at every bus with inflow
/// In(n) = local generation + incoming line flow,
///   rho_n In(n) = sum_{g at n} e_g p_g + sum_{incoming l} rho_src(l) |f_l|.
/// Copper-plate cases get the system average everywhere. Throws
/// UnbalancedInjection when |sum p - sum d| > 1e-6 and SingularSharingSystem
/// when the system is singular and regularization is off.
NciResult compute_nci(const MarketCase& c, std::span<const double> p,
                      std::span<const double> d, std::span<const double> flows,
                      const NciOptions& opts = {});

}  // namespace carbonmkt
