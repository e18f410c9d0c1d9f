#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mbf/harness/runner.hpp"

namespace mbf::harness {

struct NeesInterval {
  double low = 0.0;
  double high = 0.0;
};

/// Two-sided interval for the time-averaged NEES of `steps` independent
/// `dim`-dimensional errors: chi-square quantiles of dim * steps degrees
/// of freedom, divided by steps.
NeesInterval neesInterval(std::size_t dim, std::size_t steps, double confidence = 0.95);

/// (x - mean)' cov^-1 (x - mean); NaN when cov cannot be factored.
double nees(const Vector& truth, const GaussianBelief& estimate);

struct FlagCounts {
  std::size_t jitter = 0;
  std::size_t mcFallback = 0;
  std::size_t bandwidthFloored = 0;
  std::size_t degenerateSkipped = 0;
};

struct VariantMetrics {
  std::string name;
  std::vector<double> rmse;                     ///< per state over steps 1..N
  std::vector<std::vector<double>> absError;    ///< [step][state], steps 1..N
  std::vector<double> neesPerStep;              ///< steps 1..N
  double neesMean = 0.0;
  NeesInterval neesBounds;
  bool neesConsistent = false;
  FlagCounts flags;
  std::optional<double> maxMeanDiff;  ///< against the reference variant
  std::optional<double> maxCovDiff;
};

struct MetricsReport {
  std::vector<std::string> stateNames;
  std::size_t steps = 0;
  std::optional<std::string> reference;
  std::vector<VariantMetrics> variants;
};

MetricsReport computeMetrics(const Trajectory& trajectory, const std::vector<VariantRun>& runs,
                             const std::optional<std::string>& reference);

}  // namespace mbf::harness
