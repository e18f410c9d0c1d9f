#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "mbf/harness/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
};

void addScenarioFlags(CLI::App* cmd, Flags& f, bool withVariant) {
  cmd->add_option("--config", f.config, "Scenario JSON file")->required();
  cmd->add_option("--seed", f.seed, "Override all seeds with streams derived from N");
  cmd->add_option("--out", f.out, "Output directory");
  if (withVariant) cmd->add_option("--variant", f.variant, "Run only this variant (plus the reference)");
}

mbf::harness::CommandOptions toOptions(const Flags& f) {
  return {f.config, f.seed, f.out, f.variant};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginalized Bayesian filtering harness"};
  app.require_subcommand(1);
  Flags flags;
  auto* simulate = app.add_subcommand("simulate", "Simulate a trajectory and write trajectory.csv");
  addScenarioFlags(simulate, flags, false);
  auto* run = app.add_subcommand("run", "Filter with every variant; write estimates and metrics");
  addScenarioFlags(run, flags, true);
  auto* compare = app.add_subcommand("compare", "As run, plus a comparison table against the reference");
  addScenarioFlags(compare, flags, true);
  app.add_subcommand("selftest", "Run the acceptance checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mbf::harness::kExitOk : mbf::harness::kExitConfig;
  }

  using namespace mbf::harness;
  if (simulate->parsed()) return commandSimulate(toOptions(flags), std::cout, std::cerr);
  if (run->parsed()) return commandRun(toOptions(flags), std::cout, std::cerr);
  if (compare->parsed()) return commandCompare(toOptions(flags), std::cout, std::cerr);
  return commandSelftest(std::cout);
}
