#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htmm/oracles.hpp"

namespace htmm {

enum class CheckStatus { Pass, Fail, Skip };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Fail;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  EnumerationBudget budget;
  std::uint64_t seed = 20240611;
  int models = 100;
  // Negative control: run the checks against a deliberately broken
  // covariance (theta2 replaced by 1 - theta2).
  bool inject_fault = false;
};

struct DualityError {
  double mean = 0.0;
  double covariance = 0.0;
  int models = 0;
};

// Largest absolute disagreement between the spectral closed forms and the
// matrix-power forms over random models with r cycling through 1..3.
DualityError spectral_duality(int models, int T, std::uint64_t seed, bool inject_fault = false);

// Same against path enumeration for r = 1.
DualityError enumeration_duality(int models, int r, int T, std::uint64_t seed,
                                 const EnumerationBudget& budget, bool inject_fault = false);

std::vector<CheckResult> run_verify(const VerifyOptions& options);
std::string format_table(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);  // skips count as passed

}  // namespace htmm
