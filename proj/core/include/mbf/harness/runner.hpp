#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mbf/filter.hpp"
#include "mbf/harness/scenario.hpp"

namespace mbf::harness {

/// Truth states and measurements for steps 0..N. Step 0 carries the
/// initial state and never a measurement.
struct Trajectory {
  std::vector<std::string> stateNames;
  Eigen::Index outputDim = 0;
  std::vector<Vector> states;
  std::vector<std::optional<Vector>> measurements;

  std::size_t steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
};

/// Whether step k (1-based) is measured under the scenario's schedule.
bool measuredAt(const ScenarioConfig& config, std::size_t k);

/// x_k = S' f(S_A x_{k-1}, w_k) + S'' S_B x_{k-1}, y_k = h(T_A x_k, v_k).
Trajectory simulateTrajectory(const ScenarioConfig& config, const ScenarioSystem& system);

struct VariantRun {
  std::string name;
  std::vector<GaussianBelief> estimates;  ///< steps 0..N
  std::vector<StepFlags> flags;
  double wallSeconds = 0.0;
};

/// Filter the trajectory's measurements with one variant. The per-step seed
/// is derived from the rules seed and the step index.
VariantRun runVariant(const VariantConfig& variant, const ScenarioSystem& system,
                      const Trajectory& trajectory, const Seeds& seeds);

// --- Command-line verbs ----------------------------------------------------

struct CommandOptions {
  std::string configPath;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outDir;
  std::optional<std::string> variant;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Applies --seed and --out to a parsed config. A seed override replaces
/// all three seeds with streams derived from it.
void applyOverrides(ScenarioConfig& config, const CommandOptions& options);

int commandSimulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int commandRun(const CommandOptions& options, std::ostream& out, std::ostream& err);
int commandCompare(const CommandOptions& options, std::ostream& out, std::ostream& err);
int commandSelftest(std::ostream& out);

}  // namespace mbf::harness
