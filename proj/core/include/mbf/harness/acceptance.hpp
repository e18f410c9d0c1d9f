#pragma once

#include <string>
#include <vector>

namespace mbf::harness {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  ///< measured error against the pinned tolerance
};

inline constexpr int kCriterionCount = 11;

/// Runs one acceptance check (1..kCriterionCount). Library errors are
/// reported as a failed result, never thrown.
CriterionResult runCriterion(int id);

std::vector<CriterionResult> runAcceptance();

/// "PASS  3 cross-level-consistency: ..." style line.
std::string formatResult(const CriterionResult& result);

}  // namespace mbf::harness
