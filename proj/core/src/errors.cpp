#include "mbf/errors.hpp"

namespace mbf {

std::string_view toString(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::SingularSplit: return "SingularSplit";
    case ErrorCode::DegenerateActiveCov: return "DegenerateActiveCov";
    case ErrorCode::NonInvertibleJb: return "NonInvertibleJb";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::ZeroBandwidth: return "ZeroBandwidth";
    case ErrorCode::RuleUnsupportedForNoise: return "RuleUnsupportedForNoise";
    case ErrorCode::SingularXiN: return "SingularXiN";
    case ErrorCode::DegenerateUpdate: return "DegenerateUpdate";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::SingularInnovationCov: return "SingularInnovationCov";
    case ErrorCode::UnknownState: return "UnknownState";
    case ErrorCode::IncompatibleUnits: return "IncompatibleUnits";
    case ErrorCode::RankDeficientActive: return "RankDeficientActive";
    case ErrorCode::BindingErrors: return "BindingErrors";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool Error::isConfigError() const noexcept {
  switch (code_) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownState:
    case ErrorCode::IncompatibleUnits:
    case ErrorCode::BindingErrors:
    case ErrorCode::LevelMismatch:
    case ErrorCode::BadPartition:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

}  // namespace mbf
