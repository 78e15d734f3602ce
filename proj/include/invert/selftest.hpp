#pragma once

#include <string>
#include <vector>

namespace invert {

struct SelftestCase {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Closed-form sanity checks across all modules. Deterministic.
std::vector<SelftestCase> run_selftest();

/// name,value,expected,tolerance,pass
std::string selftest_csv(const std::vector<SelftestCase>& cases);

}  // namespace invert
