#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hdiff::oracle {

struct CheckResult {
  std::string name;
  double error;      // measured discrepancy
  double tolerance;  // pass iff error <= tolerance
  bool passed;
  double seconds;
};

struct Check {
  std::string name;
  double tolerance;
  std::function<double()> measure;
};

/// Every brute-force comparison: field, mollifier, schedule, diffusion,
/// gradients, sparse conv and kernel resize.
std::vector<Check> all_checks(std::uint64_t seed);

CheckResult run_check(const Check& check);
std::vector<CheckResult> run_suite(const std::vector<Check>& checks);

/// name,error,tolerance,status,seconds
void write_table(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace hdiff::oracle
