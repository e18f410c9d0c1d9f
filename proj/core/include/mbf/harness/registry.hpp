#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbf/composition.hpp"
#include "mbf/filter.hpp"
#include "mbf/models.hpp"

namespace mbf::harness {

/// Scalar model parameters by name. Lookups of names a model does not
/// know are rejected so that typos surface as config errors.
struct ModelParams {
  std::map<std::string, double> values;

  double get(const std::string& name, double fallback) const;
};

/// A built-in model with every level it natively supports. States are
/// bound by name and unit, so a scenario can embed the model in a larger
/// layout.
struct RegisteredModel {
  std::string key;
  StateLayout layout;
  Vector initialMean;
  Vector initialStd;

  SubmodelBinding transitionBinding;
  SubmodelBinding outputBinding;

  TransitionModelA transitionA;
  std::optional<TransitionModelB> transitionB;
  std::optional<TransitionModelC> transitionC;
  std::optional<TransitionModelD> transitionD;

  OutputModelA outputA;
  std::optional<OutputModelB> outputB;
  std::optional<OutputModelC> outputC;
  std::optional<OutputModelD> outputD;

  /// Partitions used when a variant lowers a level-a/b model to level c.
  std::optional<RowPartition> predictPartition;
  std::optional<RowPartition> updatePartition;

  /// The most specific native model at or below the requested level; the
  /// filter lowers it further when needed.
  TransitionModel transitionFor(PredictLevel level) const;
  OutputModel outputFor(UpdateLevel level) const;
};

std::vector<std::string> registeredModelKeys();

/// Throws ConfigError for an unknown key, unknown parameter names, or
/// parameter values outside a model's domain.
RegisteredModel makeModel(const std::string& key, const ModelParams& params);

}  // namespace mbf::harness
