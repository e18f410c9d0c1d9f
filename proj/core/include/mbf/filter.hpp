#pragma once

#include <cstdint>
#include <optional>

#include "mbf/gaussian.hpp"
#include "mbf/kde.hpp"
#include "mbf/models.hpp"
#include "mbf/moments.hpp"
#include "mbf/quadrature.hpp"

namespace mbf {

enum class PredictLevel { A, B, C, D };
enum class UpdateLevel { AKde, ALikelihood, AParametric, B, C, D };
enum class DegeneratePolicy { Error, KeepPrior };

/// How one filter step is computed.
///
/// A model supplied at a more general level than configured is lowered
/// automatically (linearized about the current marginal means). A model
/// that is more specific than the configured level raises LevelMismatch.
struct StepConfig {
  PredictLevel predictLevel = PredictLevel::D;
  UpdateLevel updateLevel = UpdateLevel::D;
  IntegrationRule predictRule = IntegrationRule::gaussHermite();
  IntegrationRule updateRule = IntegrationRule::gaussHermite();
  KernelConfig kernel = KernelConfig::silverman();
  IntegrationRule kdeNoiseRule = IntegrationRule::monteCarlo(10000, 0);
  DegeneratePolicy degeneratePolicy = DegeneratePolicy::KeepPrior;
  /// Row partitions used when lowering to level c.
  std::optional<RowPartition> predictPartition;
  std::optional<RowPartition> updatePartition;
  double jacobianStep = kDefaultJacobianStep;
};

struct TransitionStage {
  SubspaceSplit split;
  TransitionModel model;
};

struct OutputStage {
  SubspaceSplit split;
  OutputModel model;
};

struct StepFlags {
  bool jitterApplied = false;
  bool mcFallback = false;
  bool bandwidthFloored = false;
  bool degenerateSkipped = false;
};

struct StepReport {
  GaussianBelief predicted;
  GaussianBelief updated;
  std::optional<PredictionMoments> prediction;
  std::optional<UpdateMoments> update;
  std::size_t predictNodes = 0;
  std::size_t updateNodes = 0;
  StepFlags flags;
};

/// x = S' m + S'' S_B x_prev,
/// P = S' Pa S'^T + S'' S_B P_prev S_B^T S''^T + (S' Pc M^T S''^T + transpose).
GaussianBelief assemblePrediction(const GaussianBelief& prior, const SubspaceSplit& split,
                                  const PredictionMoments& moments, bool* jittered = nullptr);

/// x = T' m + T'' (T_B x_pred + N (m - T_A x_pred)),
/// P = T' Pa T'^T + T'' (T_B P T_B^T - N T_A P T_B^T + N Pa N^T) T''^T
///     + (T' Pa N^T T''^T + transpose).
GaussianBelief assembleUpdate(const GaussianBelief& predicted, const SubspaceSplit& split,
                              const UpdateMoments& moments, bool* jittered = nullptr);

/// Level dispatch (with lowering) for the prediction moments. Monte Carlo
/// rule seeds are mixed with `seed`.
PredictionMoments predictionMoments(const GaussianBelief& prior, const TransitionStage& stage,
                                    const StepConfig& config, std::uint64_t seed);

/// Level dispatch (with lowering) for the update moments.
UpdateMoments updateMoments(const GaussianBelief& predicted, const OutputStage& stage,
                            const Vector& y, const StepConfig& config, std::uint64_t seed);

/// One predict-then-update step. A null transition skips prediction; a null
/// output or absent y skips the update. The degenerate-update policy is
/// applied here.
StepReport step(const GaussianBelief& belief, const TransitionStage* transition,
                const OutputStage* output, const std::optional<Vector>& y, const StepConfig& config,
                std::uint64_t seed);

/// Sequential filter state: the current belief and the last report.
class MarginalizedFilter {
public:
  MarginalizedFilter(GaussianBelief initial, StepConfig config)
      : belief_(std::move(initial)), config_(std::move(config)) {}

  const StepReport& step(const TransitionStage* transition, const OutputStage* output,
                         const std::optional<Vector>& y, std::uint64_t seed);

  const GaussianBelief& belief() const noexcept { return belief_; }
  const StepConfig& config() const noexcept { return config_; }
  const std::optional<StepReport>& lastReport() const noexcept { return last_; }

private:
  GaussianBelief belief_;
  StepConfig config_;
  std::optional<StepReport> last_;
};

}  // namespace mbf
