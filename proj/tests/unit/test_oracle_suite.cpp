#include <gtest/gtest.h>

#include <sstream>

#include "hdiff/oracles/suite.hpp"

namespace hdiff::oracle {

// Keeps discovered test names readable instead of a byte dump of the closure.
void PrintTo(const Check& check, std::ostream* os) { *os << check.name; }

namespace {

class OracleCheck : public ::testing::TestWithParam<Check> {};

TEST_P(OracleCheck, WithinTolerance) {
  const CheckResult r = run_check(GetParam());
  EXPECT_TRUE(r.passed) << r.name << ": error " << r.error << " > " << r.tolerance;
}

INSTANTIATE_TEST_SUITE_P(Suite, OracleCheck, ::testing::ValuesIn(all_checks(0)),
                         [](const ::testing::TestParamInfo<Check>& info) { return info.param.name; });

TEST(OracleTable, Format) {
  const std::vector<CheckResult> rs{{"a", 1e-9, 1e-6, true, 0.5}, {"b", 1.0, 0.1, false, 0.25}};
  std::ostringstream os;
  write_table(os, rs);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "name,error,tolerance,status,seconds");
  EXPECT_NE(s.find("a,"), std::string::npos);
  EXPECT_NE(s.find("PASS"), std::string::npos);
  EXPECT_NE(s.find("FAIL"), std::string::npos);
}

TEST(OracleSuite, ThrowingCheckIsAFailure) {
  const CheckResult r = run_check({"boom", 1.0, [] () -> double { throw std::runtime_error("x"); }});
  EXPECT_FALSE(r.passed);
}

}  // namespace
}  // namespace hdiff::oracle
