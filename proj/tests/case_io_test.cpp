#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "carbonmkt/case_io.hpp"
#include "carbonmkt/errors.hpp"

namespace carbonmkt {
namespace {

const std::filesystem::path kData = CARBONMKT_DATA_DIR;

TEST(SimpleSystem, MatchesParameterTables) {
  const MarketCase c = bundled_simple_system();
  ASSERT_EQ(c.generators.size(), 6u);
  ASSERT_EQ(c.loads.size(), 8u);
  double pmax = 0.0, dmax = 0.0;
  for (const auto& g : c.generators) pmax += g.capacity;
  for (const auto& d : c.loads) dmax += d.capacity;
  EXPECT_EQ(pmax, 3350.0);
  EXPECT_EQ(dmax, 2670.0);
  EXPECT_EQ(c.carbon_price, 0.07);
  EXPECT_TRUE(c.network.copper_plate);
  EXPECT_EQ(c.generators[0].cost, 0.472);
  EXPECT_EQ(c.generators[5].emission, 0.3);
  EXPECT_EQ(c.loads[2].utility, 0.85);
  EXPECT_EQ(c.loads[3].capacity, 500.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(SimpleSystem, BundledFileEqualsBuiltIn) {
  const MarketCase c = load_case(kData / "simple.case");
  EXPECT_EQ(c, bundled_simple_system());
  EXPECT_EQ(c.display_scale, 1000.0);
}

TEST(CaseIo, RoundTripIsExact) {
  RandomCaseSizes sizes;
  sizes.buses = 7;
  sizes.generators = 5;
  sizes.loads = 6;
  sizes.extra_lines = 3;
  sizes.copper_plate = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MarketCase c = random_case(seed, sizes);
    c.network.lines[0].capacity = std::numeric_limits<double>::infinity();
    EXPECT_EQ(parse_case(serialize_case(c)), c);
  }
  const MarketCase s = bundled_simple_system();
  const auto tmp = std::filesystem::temp_directory_path() / "carbonmkt_rt.case";
  save_case(s, tmp);
  EXPECT_EQ(load_case(tmp), s);
  std::filesystem::remove(tmp);
}

std::string simple_text() { return serialize_case(bundled_simple_system()); }

TEST(CaseIo, EmptyGeneratorListRejected) {
  MarketCase c = bundled_simple_system();
  c.generators.clear();
  try {
    parse_case(serialize_case(c));
    FAIL();
  } catch (const InvariantViolation& e) {
    EXPECT_EQ(e.field(), "generators");
  }
}

TEST(CaseIo, LoadOnMissingBusNamesTheBus) {
  MarketCase c = bundled_simple_system();
  c.loads[2].bus = 42;
  try {
    parse_case(serialize_case(c));
    FAIL();
  } catch (const InvariantViolation& e) {
    EXPECT_EQ(e.field(), "loads[2].bus");
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
}

TEST(CaseIo, UnknownFieldRejected) {
  std::string text = simple_text();
  const auto pos = text.find("\"cost\"");
  text.insert(pos, "\"colour\": 3, ");
  try {
    parse_case(text);
    FAIL();
  } catch (const CaseParseError& e) {
    EXPECT_EQ(e.field(), "generators[0].colour");
  }
}

TEST(CaseIo, SyntaxErrorReportsLine) {
  std::string text = simple_text();
  // break the fourth line
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) pos = text.find('\n', pos) + 1;
  text.insert(pos, "}}");
  try {
    parse_case(text);
    FAIL();
  } catch (const CaseParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(CaseIo, WrongTypeAndSchemaRejected) {
  std::string text = simple_text();
  text.replace(text.find("\"v1\""), 4, "\"v0\"");
  EXPECT_THROW(parse_case(text), CaseParseError);
  MarketCase c = bundled_simple_system();
  c.carbon_price = -0.1;
  EXPECT_THROW(parse_case(serialize_case(c)), InvariantViolation);
}

TEST(CaseIo, MissingFileIsInputError) {
  EXPECT_THROW(load_case("/nonexistent/none.case"), InputError);
}

TEST(RandomCase, DeterministicAndValid) {
  RandomCaseSizes sizes;
  sizes.buses = 5;
  sizes.extra_lines = 2;
  sizes.copper_plate = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MarketCase a = random_case(seed, sizes);
    EXPECT_EQ(a, random_case(seed, sizes));
    EXPECT_NO_THROW(a.validate());
    EXPECT_EQ(a.network.lines.size(), 6u);
  }
  EXPECT_NE(random_case(1), random_case(2));
}

TEST(RandomCase, InvertedRangeRejected) {
  RandomCaseRanges r;
  r.cost = {0.6, 0.3};
  EXPECT_THROW(random_case(1, {}, r), InputError);
}

TEST(ComparisonReport, CsvColumnsAndScaling) {
  ComparisonReport rep;
  rep.display_scale = 1000.0;
  rep.rows.push_back({"t1", 1, 2, 3, 4, 5, 6, 7, ""});
  rep.rows.push_back({"t2", 0, 0, 0, 0, 0, 0, 0, "boom"});
  std::ostringstream out;
  write_comparison_csv(rep, out);
  EXPECT_EQ(out.str(),
            "mechanism,generator_net_profit,load_net_profit,generator_revenue,"
            "load_payment,carbon_tax,subsidy,social_welfare\n"
            "t1,1000,2000,3000,4000,5000,6000,7000\n"
            "t2,,,,,,,\n");
  std::ostringstream js;
  write_comparison_json(rep, js);
  EXPECT_NE(js.str().find("\"error\": \"boom\""), std::string::npos);
}

}  // namespace
}  // namespace carbonmkt
