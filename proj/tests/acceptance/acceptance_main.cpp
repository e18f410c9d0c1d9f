#include <cstdlib>
#include <iostream>
#include <string>

#include "mbf/harness/acceptance.hpp"

// Prints one PASS/FAIL line per criterion. With an argument, runs only the
// listed criterion ids.
int main(int argc, char** argv) {
  using namespace mbf::harness;
  bool ok = true;
  auto report = [&](const CriterionResult& r) {
    std::cout << formatResult(r) << std::endl;
    ok = ok && r.passed;
  };
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) report(runCriterion(std::atoi(argv[i])));
  } else {
    for (int id = 1; id <= kCriterionCount; ++id) report(runCriterion(id));
  }
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
