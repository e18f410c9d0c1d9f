#include <cmath>
#include <functional>
#include <numbers>

#include "mbf/kde.hpp"
#include "mbf/quadrature.hpp"
#include "test_util.hpp"

using namespace mbf;
using test::Random;
using test::scalar;
using test::vec;

TEST(Rng, CounterBasedDeterminism) {
  EXPECT_EQ(rng::uniform(1, 5), rng::uniform(1, 5));
  EXPECT_NE(rng::uniform(1, 5), rng::uniform(1, 6));
  EXPECT_NE(rng::uniform(1, 5), rng::uniform(2, 5));
  const Vector a = rng::normalVector(9, 3, 4);
  EXPECT_DOUBLE_EQ(a(2), rng::normal(9, 3 * 4 + 2));
}

TEST(Rng, UniformOpenInterval) {
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = rng::uniform(42, i);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMomentsWithinStandardErrors) {
  constexpr int n = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng::normal(7, i);
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(GaussHermite1d, DegreeThreeNodesAndWeights) {
  const auto [x, w] = gaussHermite1d(3);
  EXPECT_NEAR(x(0), -std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(x(1), 0.0, 1e-14);
  EXPECT_NEAR(x(2), std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(w(0), 1.0 / 6, 1e-14);
  EXPECT_NEAR(w(1), 2.0 / 3, 1e-14);
  EXPECT_NEAR(w(2), 1.0 / 6, 1e-14);
}

TEST(GaussHermite1d, WeightsSumToOne) {
  for (int g : {1, 2, 5, 9, 20, 60}) {
    const auto [x, w] = gaussHermite1d(g);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12) << g;
    EXPECT_TRUE(std::is_sorted(x.data(), x.data() + x.size()));
  }
  EXPECT_ERROR_CODE(gaussHermite1d(0), ErrorCode::InvalidArgument);
}

TEST(NodesFor, DegreeOneIsTheMean) {
  const auto s = nodesFor(IntegrationRule::gaussHermite(1), vec({1, -2}), (Matrix(2, 2) << 2, 1, 1, 3).finished());
  ASSERT_EQ(s.size(), 1u);
  EXPECT_MAT_NEAR(s.points[0], vec({1, -2}), 0.0);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
}

TEST(NodesFor, MonteCarloIsReproducible) {
  const auto rule = IntegrationRule::monteCarlo(100, 17);
  const auto a = nodesFor(rule, vec({0, 0}), Matrix::Identity(2, 2));
  const auto b = nodesFor(rule, vec({0, 0}), Matrix::Identity(2, 2));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
  EXPECT_EQ(a.weights, std::vector<double>(100, 1.0 / 100));
  const auto c = nodesFor(rule.reseeded(18), vec({0, 0}), Matrix::Identity(2, 2));
  EXPECT_NE(a.points[0], c.points[0]);
}

TEST(NodesFor, Errors) {
  EXPECT_ERROR_CODE(nodesFor(IntegrationRule::gaussHermite(0), vec({0}), scalar(1)), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(nodesFor(IntegrationRule::monteCarlo(1, 0), vec({0}), scalar(1)), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(nodesFor(IntegrationRule::unscented(-1.0), vec({0}), scalar(1)), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(nodesFor(IntegrationRule::gaussHermite(), vec({0, 0}), scalar(1)), ErrorCode::DimensionMismatch);
  EXPECT_ERROR_CODE(nodesFor(IntegrationRule::gaussHermite(), vec({0}), scalar(-1)), ErrorCode::NotPsd);
  auto big = IntegrationRule::gaussHermite(10);
  big.nodeBudget = 999;
  EXPECT_ERROR_CODE(nodesFor(big, Vector::Zero(3), Matrix::Identity(3, 3)), ErrorCode::DimensionTooLarge);
}

TEST(NodesWithFallback, OverBudgetGridBecomesMonteCarlo) {
  auto rule = IntegrationRule::gaussHermite(10);
  rule.nodeBudget = 999;
  rule.fallbackCount = 500;
  const auto g = nodesWithFallback(rule, Vector::Zero(3), Matrix::Identity(3, 3));
  EXPECT_TRUE(g.mcFallback);
  EXPECT_EQ(g.samples.size(), 500u);
  const auto ok = nodesWithFallback(IntegrationRule::gaussHermite(3), Vector::Zero(3), Matrix::Identity(3, 3));
  EXPECT_FALSE(ok.mcFallback);
  EXPECT_EQ(ok.samples.size(), 27u);
}

TEST(Estimate, MomentsOfOneDimensionalRules) {
  const auto s = nodesFor(IntegrationRule::gaussHermite(1), vec({1.5}), scalar(4));
  EXPECT_DOUBLE_EQ(estimate([](const Vector& x) { return x(0); }, s), 1.5);
  const auto s2 = nodesFor(IntegrationRule::gaussHermite(2), vec({0}), scalar(1));
  EXPECT_NEAR(estimate([](const Vector& x) { return x(0) * x(0); }, s2), 1.0, 1e-14);
  const auto s3 = nodesFor(IntegrationRule::gaussHermite(3), vec({0}), scalar(1));
  EXPECT_NEAR(estimate([](const Vector& x) { return std::pow(x(0), 4); }, s3), 3.0, 1e-13);
}

TEST(Estimate, VectorAndMatrixValued) {
  const auto s = nodesFor(IntegrationRule::gaussHermite(3), vec({1, 2}), (Matrix(2, 2) << 2, 0.5, 0.5, 1).finished());
  const Vector m = estimate([](const Vector& x) { return x; }, s);
  EXPECT_MAT_NEAR(m, vec({1, 2}), 1e-13);
  const Matrix c = estimate([&](const Vector& x) -> Matrix { return (x - m) * (x - m).transpose(); }, s);
  EXPECT_MAT_NEAR(c, (Matrix(2, 2) << 2, 0.5, 0.5, 1).finished(), 1e-13);
}

TEST(Estimate, ZeroTotalWeight) {
  WeightedSampleSet s{{vec({1})}, {0.0}};
  EXPECT_ERROR_CODE(estimate([](const Vector& x) { return x(0); }, s), ErrorCode::ZeroTotalWeight);
}

TEST(WeightedSampleSet, Validate) {
  EXPECT_ERROR_CODE((WeightedSampleSet{{vec({1})}, {1.0, 2.0}}.validate()), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE((WeightedSampleSet{{vec({1})}, {-1.0}}.validate()), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE((WeightedSampleSet{{vec({1}), vec({1, 2})}, {1.0, 1.0}}.validate()), ErrorCode::DimensionMismatch);
  EXPECT_NO_THROW((WeightedSampleSet{{vec({1})}, {0.5}}.validate()));
}

// Property: every rule integrates constants exactly.
TEST(RuleProperty, ConstantsExact) {
  Random r(10);
  const Vector mu = r.vector(3);
  const Matrix p = r.spd(3);
  for (const auto& rule : {IntegrationRule::gaussHermite(4), IntegrationRule::unscented(),
                           IntegrationRule::unscented(2.0), IntegrationRule::monteCarlo(50, 3)}) {
    const auto s = nodesFor(rule, mu, p);
    EXPECT_NEAR(estimate([](const Vector&) { return 2.5; }, s), 2.5, 1e-14);
  }
}

TEST(RuleProperty, UnscentedMatchesGeneratingMoments) {
  Random r(11);
  for (int d = 1; d <= 5; ++d) {
    const Vector mu = r.vector(d);
    const Matrix p = r.spd(d);
    for (auto kappa : {std::optional<double>{}, std::optional<double>{0.0}, std::optional<double>{1.5}}) {
      const auto s = nodesFor(IntegrationRule::unscented(kappa), mu, p);
      EXPECT_NEAR(s.totalWeight(), 1.0, 1e-12);
      const Vector m = estimate([](const Vector& x) { return x; }, s);
      const Matrix c = estimate([&](const Vector& x) -> Matrix { return (x - mu) * (x - mu).transpose(); }, s);
      EXPECT_MAT_NEAR(m, mu, 1e-12);
      EXPECT_MAT_NEAR(c, p, 1e-12);
    }
  }
}

// Property: tensor GH of degree g is exact for x^a y^b with a, b <= 2g-1 under
// a correlated Gaussian; the oracle uses Isserlis-type moments of the
// affine transform via a much finer grid.
TEST(RuleProperty, GaussHermiteCorrelatedSecondAndFourthMoments) {
  const Matrix p = (Matrix(2, 2) << 2.0, 0.6, 0.6, 1.0).finished();
  const auto s = nodesFor(IntegrationRule::gaussHermite(3), Vector::Zero(2), p);
  // E[x^2 y^2] = p00 p11 + 2 p01^2 and E[x^4] = 3 p00^2 for a zero-mean Gaussian.
  EXPECT_NEAR(estimate([](const Vector& x) { return x(0) * x(0) * x(1) * x(1); }, s), 2.0 + 2 * 0.36, 1e-12);
  EXPECT_NEAR(estimate([](const Vector& x) { return std::pow(x(0), 4); }, s), 12.0, 1e-12);
  EXPECT_NEAR(estimate([](const Vector& x) { return std::pow(x(0), 3) * x(1); }, s), 3 * 2.0 * 0.6, 1e-12);
}

TEST(RuleProperty, MonteCarloMomentsWithinFourStandardErrors) {
  constexpr int trials = 500, n = 400;
  int inside = 0;
  for (int t = 0; t < trials; ++t) {
    const auto s = nodesFor(IntegrationRule::monteCarlo(n, 1000 + t), vec({1}), scalar(2));
    const double m = estimate([](const Vector& x) { return x(0); }, s);
    const double q = estimate([](const Vector& x) { return (x(0) - 1) * (x(0) - 1); }, s);
    // Var of the sample mean: 2/n; Var of (x-1)^2 is 2 * 2^2 = 8.
    inside += std::abs(m - 1) <= 4 * std::sqrt(2.0 / n) && std::abs(q - 2) <= 4 * std::sqrt(8.0 / n);
  }
  EXPECT_GE(inside, 0.99 * trials);
}

TEST(Silverman, MatchesFormula) {
  std::vector<Vector> out{vec({0}), vec({1}), vec({2}), vec({3})};
  const std::vector<double> w{1, 1, 1, 1};
  const double sd = std::sqrt(1.25);
  const double want = sd * std::pow(4.0 / (3.0 * 4.0), 1.0 / 5.0);
  EXPECT_NEAR(silvermanBandwidth(out, w)(0), want, 1e-14);
  // Unequal weights shrink the effective sample size.
  const std::vector<double> w2{4, 1, 1, 1};
  const double nEff = 49.0 / 19.0;
  const double mean = 6.0 / 7.0;
  const double var = (4 * mean * mean + std::pow(1 - mean, 2) + std::pow(2 - mean, 2) + std::pow(3 - mean, 2)) / 7.0;
  EXPECT_NEAR(silvermanBandwidth(out, w2)(0), std::sqrt(var) * std::pow(4.0 / (3.0 * nEff), 0.2), 1e-14);
}

namespace {
OutputModelA additive() {
  OutputModelA m;
  m.dimActive = 1;
  m.dimOutput = 1;
  m.noise = NoiseModel::gaussianNoise(scalar(1));
  m.h = [](const Vector& x, const Vector& v) -> Vector { return x + v; };
  return m;
}
}  // namespace

TEST(Kde, ConvergesToConvolvedDensity) {
  const auto model = additive();
  const auto samples = nodesFor(IntegrationRule::monteCarlo(100000, 5), vec({0}), scalar(1));
  const double z = 0.01;
  for (double y : {-1.0, 0.0, 0.5, 2.0}) {
    const double got = kdeLikelihoodAt(vec({0}), vec({y}), model, KernelConfig::fixed(scalar(z)), samples);
    const double want = std::exp(-0.5 * y * y / (1 + z)) / std::sqrt(2 * std::numbers::pi * (1 + z));
    EXPECT_NEAR(got / want, 1.0, 0.05) << y;
  }
}

TEST(Kde, ExactSamplesGiveKernelPeak) {
  const auto model = additive();
  const WeightedSampleSet zero{{vec({0}), vec({0})}, {1.0, 1.0}};
  const double got = kdeLikelihoodAt(vec({2}), vec({2}), model, KernelConfig::fixed(scalar(0.25)), zero);
  EXPECT_NEAR(got, 1.0 / std::sqrt(2 * std::numbers::pi * 0.25), 1e-14);
}

TEST(Kde, SilvermanFloorIsFlagged) {
  const auto model = additive();
  const WeightedSampleSet zero{{vec({0}), vec({0})}, {1.0, 1.0}};
  KdeDiagnostics diag;
  const double got = kdeLikelihoodAt(vec({2}), vec({2}), model, KernelConfig::silverman(), zero, &diag);
  EXPECT_TRUE(diag.bandwidthFloored);
  EXPECT_GT(got, 0.0);
}

TEST(Kde, Errors) {
  const auto model = additive();
  const WeightedSampleSet zeroWeights{{vec({0}), vec({1})}, {0.0, 0.0}};
  EXPECT_ERROR_CODE(kdeLikelihoodAt(vec({0}), vec({0}), model, KernelConfig::silverman(), zeroWeights),
                    ErrorCode::ZeroTotalWeight);
  const WeightedSampleSet ok{{vec({0}), vec({1})}, {1.0, 1.0}};
  EXPECT_ERROR_CODE(kdeLikelihoodAt(vec({0}), vec({0}), model, KernelConfig::fixed(scalar(-1)), ok),
                    ErrorCode::ZeroBandwidth);
  EXPECT_ERROR_CODE(kdeLikelihoodAt(vec({0}), vec({0}), model, KernelConfig::fixed(Matrix::Identity(2, 2)), ok),
                    ErrorCode::ZeroBandwidth);
}
