#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "carbonmkt/market_case.hpp"

namespace carbonmkt {

/// Current case-file schema tag.
inline constexpr std::string_view kCaseSchema = "v1";

/// Reads a case file. Unknown fields are rejected; syntax errors carry the
/// offending line, schema errors the offending field path.
MarketCase load_case(const std::filesystem::path& path);
MarketCase parse_case(std::string_view text);

std::string serialize_case(const MarketCase& c);
void save_case(const MarketCase& c, const std::filesystem::path& path);

/// Six generators and eight loads on an uncongested single node, kappa 0.07,
/// reported at display scale 1000.
MarketCase bundled_simple_system();

struct RandomCaseSizes {
  int buses = 1;
  int generators = 3;
  int loads = 3;
  /// lines beyond the spanning tree; ignored for copper plate
  int extra_lines = 0;
  bool copper_plate = true;
  /// lines that keep a finite capacity, the rest are unmonitored; < 0 keeps
  /// every line
  int monitored_lines = -1;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct RandomCaseRanges {
  Range cost{0.30, 0.60};
  Range emission{0.05, 1.00};
  Range generator_capacity{50.0, 200.0};
  Range utility{0.45, 0.95};
  Range load_capacity{30.0, 150.0};
  Range carbon_price{0.02, 0.20};
  Range susceptance{5.0, 20.0};
  Range line_capacity{20.0, 120.0};
};

/// Deterministic in `seed`. Throws InputError on empty or inverted ranges.
MarketCase random_case(std::uint64_t seed, const RandomCaseSizes& sizes = {},
                       const RandomCaseRanges& ranges = {});

/// One line of the mechanism comparison table (raw monetary units).
struct ComparisonRow {
  std::string mechanism;
  double generator_net_profit = 0.0;
  double load_net_profit = 0.0;
  double generator_revenue = 0.0;
  double load_payment = 0.0;
  double carbon_tax = 0.0;
  double subsidy = 0.0;
  double social_welfare = 0.0;
  /// empty unless the mechanism failed; the numeric columns are then unset
  std::string error;
};

struct ComparisonReport {
  std::string case_name;
  double display_scale = 1.0;
  std::vector<ComparisonRow> rows;
};

/// CSV header plus one row per mechanism, monetary columns multiplied by the
/// display scale.
void write_comparison_csv(const ComparisonReport& report, std::ostream& out);
void write_comparison_json(const ComparisonReport& report, std::ostream& out);

}  // namespace carbonmkt
