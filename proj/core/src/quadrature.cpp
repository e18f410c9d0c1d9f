#include "mbf/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "mbf/rng.hpp"

namespace mbf {

double WeightedSampleSet::totalWeight() const noexcept {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

void WeightedSampleSet::validate() const {
  if (points.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "sample points and weights differ in length");
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "sample weights must be finite and nonnegative");
    }
  }
  const Eigen::Index d = dim();
  for (const auto& p : points) {
    if (p.size() != d) throw Error(ErrorCode::DimensionMismatch, "sample points differ in dimension");
  }
  if (!(totalWeight() > kMinTotalWeight)) {
    throw Error(ErrorCode::ZeroTotalWeight, "sample weights sum to zero");
  }
}

IntegrationRule IntegrationRule::reseeded(std::uint64_t seed) const {
  IntegrationRule out = *this;
  if (auto* mc = std::get_if<MonteCarlo>(&out.kind)) mc->seed = seed;
  out.fallbackSeed = rng::deriveSeed(seed, 0xfa11);
  return out;
}

std::pair<Vector, Vector> gaussHermite1d(int degree) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "Gauss-Hermite degree must be >= 1");
  const Eigen::Index g = degree;
  if (g == 1) return {Vector::Zero(1), Vector::Ones(1)};

  // Jacobi matrix of the probabilists' Hermite recurrence.
  Matrix jacobi = Matrix::Zero(g, g);
  for (Eigen::Index k = 1; k < g; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  Vector nodes = es.eigenvalues();
  Vector weights = es.eigenvectors().row(0).transpose().array().square();

  // The rule is symmetric about zero; enforce it exactly.
  for (Eigen::Index i = 0; i < g / 2; ++i) {
    const Eigen::Index j = g - 1 - i;
    const double x = 0.5 * (nodes(j) - nodes(i));
    const double w = 0.5 * (weights(i) + weights(j));
    nodes(i) = -x;
    nodes(j) = x;
    weights(i) = weights(j) = w;
  }
  if (g % 2 == 1) nodes(g / 2) = 0.0;
  weights /= weights.sum();
  return {nodes, weights};
}

WeightedSampleSet monteCarloNodes(std::size_t count, std::uint64_t seed, const Vector& mean,
                                  const Matrix& cov) {
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "Monte Carlo rule needs at least 2 samples");
  const Matrix root = gaussianSqrt(cov);
  WeightedSampleSet s;
  s.points.reserve(count);
  s.weights.assign(count, 1.0 / static_cast<double>(count));
  for (std::size_t i = 0; i < count; ++i) {
    s.points.push_back(mean + root * rng::normalVector(seed, i, mean.size()));
  }
  return s;
}

namespace {

WeightedSampleSet gaussHermiteNodes(const GaussHermite& gh, std::size_t budget, const Vector& mean,
                                    const Matrix& cov) {
  const Eigen::Index d = mean.size();
  const auto [x1, w1] = gaussHermite1d(gh.degree);
  double gridSize = 1.0;
  for (Eigen::Index j = 0; j < d; ++j) gridSize *= gh.degree;
  if (gridSize > static_cast<double>(budget)) {
    std::ostringstream os;
    os << "Gauss-Hermite grid of " << gh.degree << "^" << d << " nodes exceeds the budget of "
       << budget;
    throw Error(ErrorCode::DimensionTooLarge, os.str());
  }
  const Matrix root = gaussianSqrt(cov);
  const auto total = static_cast<std::size_t>(gridSize);
  WeightedSampleSet s;
  s.points.reserve(total);
  s.weights.reserve(total);
  std::vector<int> digit(static_cast<std::size_t>(d), 0);
  Vector z(d);
  for (std::size_t k = 0; k < total; ++k) {
    double w = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      z(j) = x1(digit[static_cast<std::size_t>(j)]);
      w *= w1(digit[static_cast<std::size_t>(j)]);
    }
    s.points.push_back(mean + root * z);
    s.weights.push_back(w);
    for (std::size_t j = 0; j < digit.size(); ++j) {
      if (++digit[j] < gh.degree) break;
      digit[j] = 0;
    }
  }
  return s;
}

WeightedSampleSet unscentedNodes(const Unscented& u, const Vector& mean, const Matrix& cov) {
  const Eigen::Index d = mean.size();
  const double kappa = u.kappa.value_or(std::max(3.0 - static_cast<double>(d), 0.0));
  if (!(kappa >= 0.0)) throw Error(ErrorCode::InvalidArgument, "unscented spread must be >= 0");
  const double spread = static_cast<double>(d) + kappa;
  WeightedSampleSet s;
  s.points.push_back(mean);
  s.weights.push_back(d == 0 ? 1.0 : kappa / spread);
  if (d == 0) return s;
  const Matrix root = gaussianSqrt(cov) * std::sqrt(spread);
  for (Eigen::Index j = 0; j < d; ++j) {
    s.points.push_back(mean + root.col(j));
    s.points.push_back(mean - root.col(j));
    s.weights.push_back(0.5 / spread);
    s.weights.push_back(0.5 / spread);
  }
  return s;
}

}  // namespace

WeightedSampleSet nodesFor(const IntegrationRule& rule, const Vector& mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rule mean and covariance disagree in dimension");
  }
  return std::visit(
      [&](const auto& k) -> WeightedSampleSet {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussHermite>) {
          return gaussHermiteNodes(k, rule.nodeBudget, mean, cov);
        } else if constexpr (std::is_same_v<K, Unscented>) {
          return unscentedNodes(k, mean, cov);
        } else {
          return monteCarloNodes(k.count, k.seed, mean, cov);
        }
      },
      rule.kind);
}

NodeGeneration nodesWithFallback(const IntegrationRule& rule, const Vector& mean, const Matrix& cov) {
  try {
    return {nodesFor(rule, mean, cov), false};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DimensionTooLarge) throw;
  }
  return {monteCarloNodes(rule.fallbackCount, rule.fallbackSeed, mean, cov), true};
}

}  // namespace mbf
