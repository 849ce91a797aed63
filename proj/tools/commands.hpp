#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "carbonmkt/baselines.hpp"
#include "carbonmkt/case_io.hpp"
#include "carbonmkt/market_case.hpp"
#include "carbonmkt/mechanism.hpp"

namespace carbonmkt::cli {

enum ExitCode { kOk = 0, kInputError = 1, kSolverError = 2, kPropertyFailure = 3 };

struct RunConfig {
  std::string command;
  std::string case_path;
  /// empty selects the command's default
  std::string mechanism;
  /// "auto" or a number in [0, 1]
  std::string delta = "auto";
  std::string output_path;
  bool json = false;
  T2Options t2;
  bool t2_flags_given = false;

  double delta_step = 0.01;
  double factor_from = 0.8;
  double factor_to = 1.3;
  double factor_step = 0.1;

  std::uint64_t seed = 0;
  /// verify: number of seeded random cases instead of --case
  int random_cases = 0;
  RandomCaseSizes sizes;
  RandomCaseRanges ranges;
  std::string case_name;

  int jobs = 1;
};

/// Parses argv (program name first) and runs the command. Reports go to
/// `out` unless --output names a file; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

/// Runs a parsed configuration; exceptions are mapped to exit codes.
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// All four mechanisms on one case. A mechanism that throws leaves its row
/// with the message in `error`.
ComparisonReport compare_mechanisms(const MarketCase& c, const T2Options& t2 = {},
                                    DeltaMode delta = {});

struct DeltaSweepRow {
  double delta = 0.0;
  double eta = 0.0;
  /// S2 + S3, raw units
  double delta_s = 0.0;
};

/// delta = 0, step, ..., 1 fanned out over `jobs` workers, merged in order.
std::vector<DeltaSweepRow> sweep_delta(const MarketCase& c, double step,
                                       int jobs = 1);

struct CapacitySweepRow {
  double factor = 1.0;
  double social_optimum = 0.0;
  /// traditional, t1, t2, proposed welfare; NaN when that run failed
  double welfare[4] = {};
};

std::vector<CapacitySweepRow> sweep_capacity(const MarketCase& c,
                                             double from, double to,
                                             double step,
                                             const T2Options& t2 = {},
                                             int jobs = 1);

void write_delta_sweep_csv(const std::vector<DeltaSweepRow>& rows,
                           double display_scale, std::ostream& out);
void write_capacity_sweep_csv(const std::vector<CapacitySweepRow>& rows,
                              double display_scale, std::ostream& out);

}  // namespace carbonmkt::cli
