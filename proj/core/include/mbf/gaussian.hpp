#pragma once

#include "mbf/linalg.hpp"

namespace mbf {

/// Mean and covariance of a Gaussian over the full state (or over a
/// projected block of it). The covariance is symmetrized on construction and
/// must be positive semidefinite to within 1e-10 of its largest eigenvalue.
class GaussianBelief {
public:
  GaussianBelief() = default;
  GaussianBelief(Vector mean, const Matrix& cov);

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

private:
  Vector mean_;
  Matrix cov_;
};

/// N(rows * mean, rows * cov * rows^T).
GaussianBelief project(const GaussianBelief& belief, const Matrix& rows);

/// Active/inactive row blocks of an invertible state transform with the
/// matching column blocks of its inverse cached:
/// [active; inactive]^-1 = [invActive invInactive].
class SubspaceSplit {
public:
  const Matrix& active() const noexcept { return active_; }
  const Matrix& inactive() const noexcept { return inactive_; }
  const Matrix& invActive() const noexcept { return invActive_; }
  const Matrix& invInactive() const noexcept { return invInactive_; }
  Eigen::Index stateDim() const noexcept { return active_.cols(); }
  Eigen::Index activeDim() const noexcept { return active_.rows(); }
  double conditionNumber() const noexcept { return condition_; }

private:
  friend SubspaceSplit makeSplit(const Matrix&, const Matrix&, double);
  Matrix active_, inactive_, invActive_, invInactive_;
  double condition_ = 1.0;
};

inline constexpr double kDefaultSplitConditionLimit = 1e12;

/// Throws SingularSplit when the stacked matrix is singular or its 2-norm
/// condition number exceeds `conditionLimit`.
SubspaceSplit makeSplit(const Matrix& active, const Matrix& inactive,
                        double conditionLimit = kDefaultSplitConditionLimit);

/// Full-state split with the whole state active and an empty inactive block.
SubspaceSplit trivialSplit(Eigen::Index n);

/// inactive * P * active^T * (active * P * active^T)^-1. This is the
/// prediction gain when fed the prior and the update gain when fed the
/// predicted belief. Raises DegenerateActiveCov if the active covariance
/// cannot be factored after one jitter retry.
Matrix inactiveGain(const GaussianBelief& belief, const SubspaceSplit& split,
                    bool* jittered = nullptr);

/// Gaussian over `target * x` given `given * x`:
/// mean(g) = baseMean + gain * (g - refMean), constant covariance.
struct ConditionalGaussian {
  Vector baseMean;
  Vector refMean;
  Matrix gain;
  Matrix cov;

  Vector meanAt(const Vector& given) const { return baseMean + gain * (given - refMean); }
};

ConditionalGaussian conditionOnSub(const GaussianBelief& belief, const Matrix& given,
                                   const Matrix& target, bool* jittered = nullptr);

}  // namespace mbf
