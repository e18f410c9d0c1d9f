#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbf/composition.hpp"
#include "mbf/filter.hpp"
#include "mbf/harness/registry.hpp"

namespace mbf::harness {

inline constexpr int kSchemaVersion = 1;

enum class Baseline { Kalman, Ekf, Ukf };

struct VariantConfig {
  std::string name;
  std::optional<Baseline> baseline;  ///< set for full-state comparators
  StepConfig step;                   ///< used when baseline is unset
};

/// A system state added by the scenario layout, with its initial belief.
struct LayoutState {
  std::string name;
  std::string unit;
  double mean = 0.0;
  double std = 0.0;
};

struct UnitConversion {
  std::string from;
  std::string to;
  double scale = 1.0;
};

struct Seeds {
  std::uint64_t truth = 1;
  std::uint64_t noise = 2;
  std::uint64_t rules = 3;
};

struct ScenarioConfig {
  std::string modelKey;
  ModelParams modelParams;
  /// System layout; empty means the model's own states.
  std::vector<LayoutState> layout;
  std::vector<UnitConversion> units;
  std::size_t steps = 50;
  Seeds seeds;
  std::optional<Vector> initialMean;
  std::optional<Vector> initialStd;
  std::size_t measurementPeriod = 1;
  std::vector<std::size_t> droppedMeasurements;
  std::optional<std::string> trajectoryPath;  ///< read instead of simulating
  std::vector<VariantConfig> variants;
  std::optional<std::string> reference;
  std::string outputDir = "out";
};

/// Parse and validate a JSON scenario. Unknown keys, a wrong schema
/// version, bad types, and inconsistent values all raise ConfigError
/// before anything is computed.
ScenarioConfig parseScenario(const std::string& jsonText);
ScenarioConfig loadScenario(const std::string& path);

/// The model, system layout, and composed splits a scenario describes.
struct ScenarioSystem {
  RegisteredModel model;
  StateLayout layout;
  UnitTable units;
  ComposedSystem composed;
  GaussianBelief initial;
  Eigen::Index outputDim = 0;
};

ScenarioSystem buildSystem(const ScenarioConfig& config);

}  // namespace mbf::harness
