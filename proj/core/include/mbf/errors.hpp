#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbf {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotPsd,
  SingularSplit,
  DegenerateActiveCov,
  NonInvertibleJb,
  BadPartition,
  DimensionTooLarge,
  ZeroTotalWeight,
  ZeroBandwidth,
  RuleUnsupportedForNoise,
  SingularXiN,
  DegenerateUpdate,
  SingularSigma,
  SingularInnovationCov,
  UnknownState,
  IncompatibleUnits,
  RankDeficientActive,
  BindingErrors,
  LevelMismatch,
  ConfigError,
};

std::string_view toString(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(toString(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

  /// Config-style errors vs numerical ones; used for CLI exit codes.
  bool isConfigError() const noexcept;

private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mbf
