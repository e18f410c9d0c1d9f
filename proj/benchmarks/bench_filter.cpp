#include <benchmark/benchmark.h>

#include <cmath>

#include "mbf/filter.hpp"
#include "mbf/rng.hpp"

namespace {

using namespace mbf;

Matrix spd(Eigen::Index n, std::uint64_t seed) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng::normal(seed, i);
  return a * a.transpose() / static_cast<double>(n) + 0.5 * Matrix::Identity(n, n);
}

void BM_GaussHermiteNodes(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto rule = IntegrationRule::gaussHermite(static_cast<int>(state.range(1)));
  const Vector mean = Vector::Zero(d);
  const Matrix cov = spd(d, 1);
  for (auto _ : state) benchmark::DoNotOptimize(nodesFor(rule, mean, cov));
  state.counters["nodes"] = std::pow(static_cast<double>(state.range(1)), static_cast<double>(d));
}
BENCHMARK(BM_GaussHermiteNodes)->Args({1, 9})->Args({2, 9})->Args({3, 9})->Args({4, 5});

// One nonlinear state driving `linear` conditionally linear states.
TransitionModelC chain(Eigen::Index linear) {
  const Eigen::Index n = linear + 1;
  TransitionModelC c;
  c.dimActive = n;
  c.partition.nonlinear = {0};
  for (int i = 1; i < n; ++i) c.partition.linear.push_back(i);
  c.noiseCov = 0.01 * Matrix::Identity(n, n);
  c.f = [n](const Vector& xn) {
    Vector out = Vector::Zero(n);
    out(0) = std::sin(xn(0));
    return out;
  };
  c.F = [n, linear](const Vector& xn) {
    Matrix F = Matrix::Zero(n, linear);
    F(0, 0) = 0.1;
    F.bottomRows(linear) = std::cos(xn(0)) * 0.9 * Matrix::Identity(linear, linear);
    return F;
  };
  c.G = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  return c;
}

void BM_PredictC(benchmark::State& state) {
  const auto linear = static_cast<Eigen::Index>(state.range(0));
  const auto model = chain(linear);
  const GaussianBelief prior(Vector::Zero(linear + 1), spd(linear + 1, 2));
  const auto split = trivialSplit(linear + 1);
  const auto rule = IntegrationRule::gaussHermite(9);
  for (auto _ : state) benchmark::DoNotOptimize(predictC(model, prior, split, rule));
}
BENCHMARK(BM_PredictC)->Arg(1)->Arg(4)->Arg(16);

// The same model integrated over the full active block at level a.
void BM_PredictAFullGrid(benchmark::State& state) {
  const auto linear = static_cast<Eigen::Index>(state.range(0));
  const auto c = chain(linear);
  TransitionModelA a;
  a.dimActive = linear + 1;
  a.noise = NoiseModel::gaussianNoise(c.noiseCov);
  a.f = [c](const Vector& x, const Vector& w) -> Vector {
    const Vector n = x.head(1);
    return c.f(n) + c.F(n) * x.tail(x.size() - 1) + w;
  };
  const GaussianBelief prior(Vector::Zero(linear + 1), spd(linear + 1, 2));
  const auto rule = IntegrationRule::gaussHermite(3);
  for (auto _ : state) benchmark::DoNotOptimize(predictA(a, prior, rule));
}
BENCHMARK(BM_PredictAFullGrid)->Arg(1)->Arg(2)->Arg(3);

// A full level-d step on a system whose active block is a small part of
// the state.
void BM_StepLevelD(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::Index na = 2;
  const Matrix I = Matrix::Identity(n, n);
  const auto split = makeSplit(I.topRows(na), I.bottomRows(n - na));
  const TransitionStage ts{split, TransitionModelD{Vector::Zero(na), 0.9 * Matrix::Identity(na, na),
                                                   Matrix::Identity(na, na), 0.1 * Matrix::Identity(na, na)}};
  const OutputStage os{split, OutputModelD{Vector::Zero(1), Matrix::Ones(1, na), Matrix::Ones(1, 1),
                                           Matrix::Ones(1, 1)}};
  const GaussianBelief belief(Vector::Zero(n), spd(n, 3));
  const std::optional<Vector> y = Vector::Ones(1);
  const StepConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(step(belief, &ts, &os, y, cfg, 0));
}
BENCHMARK(BM_StepLevelD)->Arg(4)->Arg(16)->Arg(64);

void BM_StepLevelCMonteCarloUpdate(benchmark::State& state) {
  const auto model = chain(2);
  OutputModelA out;
  out.dimActive = 3;
  out.dimOutput = 1;
  out.noise = NoiseModel::gaussianNoise(Matrix::Constant(1, 1, 0.1));
  out.h = [](const Vector& x, const Vector& v) -> Vector { return Vector::Constant(1, x(0) * x(0) + x(1)) + v; };
  out.likelihood = [](const Vector& y, const Vector& x) {
    const double e = y(0) - x(0) * x(0) - x(1);
    return std::exp(-5.0 * e * e);
  };
  const TransitionStage ts{trivialSplit(3), model};
  const OutputStage os{trivialSplit(3), out};
  StepConfig cfg;
  cfg.predictLevel = PredictLevel::C;
  cfg.updateLevel = UpdateLevel::ALikelihood;
  cfg.predictRule = IntegrationRule::gaussHermite(9);
  cfg.updateRule = IntegrationRule::monteCarlo(static_cast<std::size_t>(state.range(0)), 1);
  const GaussianBelief belief(Vector::Zero(3), spd(3, 4));
  const std::optional<Vector> y = Vector::Constant(1, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(step(belief, &ts, &os, y, cfg, 0));
}
BENCHMARK(BM_StepLevelCMonteCarloUpdate)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
