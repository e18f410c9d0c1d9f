#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "mbf/linalg.hpp"

namespace mbf {

/// Integration nodes r_i with nonnegative weights w_i. Any numerical rule
/// (quadrature, sigma points, Monte Carlo, importance sampling) reduces to one
/// of these.
struct WeightedSampleSet {
  std::vector<Vector> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return points.size(); }
  Eigen::Index dim() const noexcept { return points.empty() ? 0 : points.front().size(); }
  double totalWeight() const noexcept;

  /// Equal lengths, finite nonnegative weights, positive total, equal point
  /// dimensions. Throws InvalidArgument / ZeroTotalWeight.
  void validate() const;
};

struct GaussHermite {
  int degree = 5;  ///< nodes per dimension
};

struct Unscented {
  /// Spread parameter; must be >= 0 so every weight is nonnegative. Unset
  /// means max(3 - d, 0).
  std::optional<double> kappa;
};

struct MonteCarlo {
  std::size_t count = 10000;
  std::uint64_t seed = 0;
};

/// Maps a Gaussian (mean, cov) to a WeightedSampleSet.
struct IntegrationRule {
  std::variant<GaussHermite, Unscented, MonteCarlo> kind = GaussHermite{};
  /// Largest tensor grid nodesFor will build.
  std::size_t nodeBudget = 1'000'000;
  /// Sample count used when the moment layer falls back from an
  /// over-budget grid to Monte Carlo.
  std::size_t fallbackCount = 20'000;
  std::uint64_t fallbackSeed = 0x5eedULL;

  static IntegrationRule gaussHermite(int degree = 5) { return {GaussHermite{degree}}; }
  static IntegrationRule unscented(std::optional<double> kappa = std::nullopt) {
    return {Unscented{kappa}};
  }
  static IntegrationRule monteCarlo(std::size_t count, std::uint64_t seed) {
    return {MonteCarlo{count, seed}};
  }

  bool isSampleBased() const noexcept { return std::holds_alternative<MonteCarlo>(kind); }
  /// Copy with the Monte Carlo and fallback seeds replaced.
  IntegrationRule reseeded(std::uint64_t seed) const;
};

/// Probabilists' Gauss-Hermite rule for N(0, 1): nodes ascending, weights
/// summing to one. Computed by the Golub-Welsch eigenvalue method.
std::pair<Vector, Vector> gaussHermite1d(int degree);

/// Throws DimensionTooLarge if a tensor grid would exceed rule.nodeBudget,
/// InvalidArgument on bad rule parameters, NotPsd for invalid covariances.
WeightedSampleSet nodesFor(const IntegrationRule& rule, const Vector& mean, const Matrix& cov);

/// Count independent draws from N(mean, cov), equal weights, using the
/// counter-based generator.
WeightedSampleSet monteCarloNodes(std::size_t count, std::uint64_t seed, const Vector& mean,
                                  const Matrix& cov);

struct NodeGeneration {
  WeightedSampleSet samples;
  bool mcFallback = false;
};

/// nodesFor, except that an over-budget Gauss-Hermite grid is replaced by
/// rule.fallbackCount Monte Carlo draws and flagged instead of failing.
NodeGeneration nodesWithFallback(const IntegrationRule& rule, const Vector& mean,
                                 const Matrix& cov);

inline constexpr double kMinTotalWeight = 1e-300;

namespace detail {
template <class T>
struct PlainResult {
  using type = T;
};
template <class T>
  requires std::is_base_of_v<Eigen::EigenBase<T>, T>
struct PlainResult<T> {
  using type = typename T::PlainObject;
};
}  // namespace detail

/// m = (sum_i w_i)^-1 sum_i d(r_i) w_i. `d` may return a scalar, vector, or
/// matrix; every call must return the same shape. Throws ZeroTotalWeight if
/// the weights sum to at most 1e-300.
template <class F>
auto estimate(F&& d, const WeightedSampleSet& samples) {
  using Raw = std::decay_t<std::invoke_result_t<F&, const Vector&>>;
  using Result = typename detail::PlainResult<Raw>::type;
  const double total = samples.totalWeight();
  if (!(total > kMinTotalWeight) || samples.points.empty()) {
    throw Error(ErrorCode::ZeroTotalWeight, "sample weights sum to zero");
  }
  Result acc = Result(d(samples.points[0])) * samples.weights[0];
  for (std::size_t i = 1; i < samples.size(); ++i) {
    acc += Result(d(samples.points[i])) * samples.weights[i];
  }
  return Result(acc / total);
}

}  // namespace mbf
