#include "mbf/filter.hpp"

#include <string>

#include "mbf/rng.hpp"

namespace mbf {

namespace {

constexpr std::uint64_t kPredictStream = 1;
constexpr std::uint64_t kUpdateStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

IntegrationRule mixedRule(const IntegrationRule& rule, std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t base = 0;
  if (const auto* mc = std::get_if<MonteCarlo>(&rule.kind)) base = mc->seed;
  return rule.reseeded(rng::deriveSeed(seed ^ rng::mix64(base), stream));
}

void checkSplit(const GaussianBelief& belief, const SubspaceSplit& split, Eigen::Index modelDim) {
  if (split.stateDim() != belief.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "split does not match the state dimension");
  }
  if (split.activeDim() != modelDim) {
    throw Error(ErrorCode::DimensionMismatch, "split active rows do not match the model");
  }
}

[[noreturn]] void levelMismatch(const char* phase, std::size_t modelLevel, int configured) {
  static constexpr char kNames[] = "abcd";
  throw Error(ErrorCode::LevelMismatch, std::string(phase) + " model is level " + kNames[modelLevel] +
                                            " but the configured level is " + kNames[configured]);
}

const RowPartition& requirePartition(const std::optional<RowPartition>& p, const char* phase) {
  if (!p) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("lowering the ") + phase + " model to level c needs a row partition");
  }
  return *p;
}

int updateLevelIndex(UpdateLevel level) {
  switch (level) {
    case UpdateLevel::AKde:
    case UpdateLevel::ALikelihood:
    case UpdateLevel::AParametric: return 0;
    case UpdateLevel::B: return 1;
    case UpdateLevel::C: return 2;
    case UpdateLevel::D: return 3;
  }
  return 3;
}

}  // namespace

GaussianBelief assemblePrediction(const GaussianBelief& prior, const SubspaceSplit& split,
                                  const PredictionMoments& moments, bool* jittered) {
  const Eigen::Index a = split.activeDim();
  if (split.stateDim() != prior.dim() || moments.activeMean.size() != a ||
      moments.activeCov.rows() != a || moments.crossCov.rows() != a || moments.crossCov.cols() != a) {
    throw Error(ErrorCode::DimensionMismatch, "prediction moments do not match the split");
  }
  const Matrix M = inactiveGain(prior, split, jittered);
  const Matrix& Sp = split.invActive();
  const Matrix& Spp = split.invInactive();
  const Matrix& SB = split.inactive();

  const Vector mean = Sp * moments.activeMean + Spp * (SB * prior.mean());
  const Matrix cross = Sp * moments.crossCov * M.transpose() * Spp.transpose();
  const Matrix cov = Sp * moments.activeCov * Sp.transpose() +
                     Spp * (SB * prior.cov() * SB.transpose()) * Spp.transpose() + cross +
                     cross.transpose();
  return {mean, symmetrized(cov)};
}

GaussianBelief assembleUpdate(const GaussianBelief& predicted, const SubspaceSplit& split,
                              const UpdateMoments& moments, bool* jittered) {
  const Eigen::Index b = split.activeDim();
  if (split.stateDim() != predicted.dim() || moments.activeMean.size() != b ||
      moments.activeCov.rows() != b) {
    throw Error(ErrorCode::DimensionMismatch, "update moments do not match the split");
  }
  const Matrix N = inactiveGain(predicted, split, jittered);
  const Matrix& TA = split.active();
  const Matrix& TB = split.inactive();
  const Matrix& Tp = split.invActive();
  const Matrix& Tpp = split.invInactive();
  const Matrix& P = predicted.cov();
  const Matrix& Pa = moments.activeCov;

  const Vector mean =
      Tp * moments.activeMean +
      Tpp * (TB * predicted.mean() + N * (moments.activeMean - TA * predicted.mean()));
  const Matrix inner = TB * P * TB.transpose() - N * (TA * P * TB.transpose()) + N * Pa * N.transpose();
  const Matrix cross = Tp * Pa * N.transpose() * Tpp.transpose();
  const Matrix cov =
      Tp * Pa * Tp.transpose() + Tpp * inner * Tpp.transpose() + cross + cross.transpose();
  return {mean, symmetrized(cov)};
}

PredictionMoments predictionMoments(const GaussianBelief& prior, const TransitionStage& stage,
                                    const StepConfig& config, std::uint64_t seed) {
  checkSplit(prior, stage.split, activeDim(stage.model));
  const int level = static_cast<int>(config.predictLevel);
  const std::size_t modelLevel = stage.model.index();
  if (static_cast<int>(modelLevel) > level) levelMismatch("transition", modelLevel, level);

  const Matrix& SA = stage.split.active();
  const IntegrationRule rule = mixedRule(config.predictRule, seed, kPredictStream);
  const double h = config.jacobianStep;
  auto active = [&] { return project(prior, SA); };
  auto linRows = [&](const RowPartition& p) {
    return defaultLinPoint(prior, selectRows(SA, p.linear));
  };

  switch (config.predictLevel) {
    case PredictLevel::A:
      return predictA(std::get<TransitionModelA>(stage.model), active(), rule);
    case PredictLevel::B: {
      if (const auto* a = std::get_if<TransitionModelA>(&stage.model)) {
        return predictB(lowerToB(*a, h), active(), rule);
      }
      return predictB(std::get<TransitionModelB>(stage.model), active(), rule);
    }
    case PredictLevel::C: {
      if (const auto* c = std::get_if<TransitionModelC>(&stage.model)) {
        return predictC(*c, prior, stage.split, rule);
      }
      const RowPartition& p = requirePartition(config.predictPartition, "transition");
      p.validate(SA.rows());
      const Vector lin = linRows(p);
      if (const auto* a = std::get_if<TransitionModelA>(&stage.model)) {
        return predictC(lowerToC(*a, lin, p, h), prior, stage.split, rule);
      }
      return predictC(lowerToC(std::get<TransitionModelB>(stage.model), lin, p, h), prior,
                      stage.split, rule);
    }
    case PredictLevel::D: {
      const Vector lin = defaultLinPoint(prior, SA);
      return std::visit(
          [&](const auto& m) -> PredictionMoments {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, TransitionModelD>) {
              return predictD(m, active());
            } else {
              return predictD(lowerToD(m, lin, h), active());
            }
          },
          stage.model);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown prediction level");
}

UpdateMoments updateMoments(const GaussianBelief& predicted, const OutputStage& stage,
                            const Vector& y, const StepConfig& config, std::uint64_t seed) {
  checkSplit(predicted, stage.split, activeDim(stage.model));
  const int level = updateLevelIndex(config.updateLevel);
  const std::size_t modelLevel = stage.model.index();
  if (static_cast<int>(modelLevel) > level) levelMismatch("output", modelLevel, level);

  const Matrix& TA = stage.split.active();
  const IntegrationRule rule = mixedRule(config.updateRule, seed, kUpdateStream);
  const double h = config.jacobianStep;
  auto active = [&] { return project(predicted, TA); };

  switch (config.updateLevel) {
    case UpdateLevel::ALikelihood: {
      const auto& a = std::get<OutputModelA>(stage.model);
      if (!a.likelihood) throw Error(ErrorCode::InvalidArgument, "output model has no likelihood");
      return updateLikelihood(a.likelihood, active(), y, rule);
    }
    case UpdateLevel::AKde:
      return updateA_KDE(std::get<OutputModelA>(stage.model), active(), y, rule, config.kernel,
                         mixedRule(config.kdeNoiseRule, seed, kNoiseStream));
    case UpdateLevel::AParametric:
      return updateParametric(std::get<OutputModelA>(stage.model), active(), y, rule);
    case UpdateLevel::B: {
      if (const auto* a = std::get_if<OutputModelA>(&stage.model)) {
        return updateB(lowerToB(*a, h, defaultLinPoint(predicted, TA)), active(), y, rule);
      }
      return updateB(std::get<OutputModelB>(stage.model), active(), y, rule);
    }
    case UpdateLevel::C: {
      if (const auto* c = std::get_if<OutputModelC>(&stage.model)) {
        return updateC(*c, predicted, stage.split, y, rule);
      }
      const RowPartition& p = requirePartition(config.updatePartition, "output");
      p.validate(TA.rows());
      const Vector lin = defaultLinPoint(predicted, selectRows(TA, p.linear));
      if (const auto* a = std::get_if<OutputModelA>(&stage.model)) {
        return updateC(lowerToC(*a, lin, p, h), predicted, stage.split, y, rule);
      }
      return updateC(lowerToC(std::get<OutputModelB>(stage.model), lin, p, h), predicted,
                     stage.split, y, rule);
    }
    case UpdateLevel::D: {
      const Vector lin = defaultLinPoint(predicted, TA);
      return std::visit(
          [&](const auto& m) -> UpdateMoments {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, OutputModelD>) {
              return updateD(m, active(), y);
            } else {
              return updateD(lowerToD(m, lin, h), active(), y);
            }
          },
          stage.model);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown update level");
}

StepReport step(const GaussianBelief& belief, const TransitionStage* transition,
                const OutputStage* output, const std::optional<Vector>& y, const StepConfig& config,
                std::uint64_t seed) {
  StepReport report;
  GaussianBelief predicted = belief;
  if (transition != nullptr) {
    auto moments = predictionMoments(belief, *transition, config, seed);
    bool jit = false;
    predicted = assemblePrediction(belief, transition->split, moments, &jit);
    report.flags.jitterApplied = jit || moments.diagnostics.jitterApplied;
    report.flags.mcFallback = moments.diagnostics.mcFallback;
    report.predictNodes = moments.diagnostics.nodeCount;
    report.prediction = std::move(moments);
  }
  report.predicted = predicted;
  report.updated = predicted;

  if (output != nullptr && y) {
    try {
      auto moments = updateMoments(predicted, *output, *y, config, seed);
      bool jit = false;
      report.updated = assembleUpdate(predicted, output->split, moments, &jit);
      report.flags.jitterApplied = report.flags.jitterApplied || jit || moments.diagnostics.jitterApplied;
      report.flags.mcFallback = report.flags.mcFallback || moments.diagnostics.mcFallback;
      report.flags.bandwidthFloored = moments.diagnostics.bandwidthFloored;
      report.updateNodes = moments.diagnostics.nodeCount;
      report.update = std::move(moments);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateUpdate ||
          config.degeneratePolicy != DegeneratePolicy::KeepPrior) {
        throw;
      }
      report.flags.degenerateSkipped = true;
    }
  }
  return report;
}

const StepReport& MarginalizedFilter::step(const TransitionStage* transition,
                                           const OutputStage* output,
                                           const std::optional<Vector>& y, std::uint64_t seed) {
  last_ = mbf::step(belief_, transition, output, y, config_, seed);
  belief_ = last_->updated;
  return *last_;
}

}  // namespace mbf
