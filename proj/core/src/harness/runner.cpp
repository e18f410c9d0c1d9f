#include "mbf/harness/runner.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "mbf/harness/acceptance.hpp"
#include "mbf/harness/baselines.hpp"
#include "mbf/harness/io.hpp"
#include "mbf/harness/metrics.hpp"
#include "mbf/rng.hpp"

namespace mbf::harness {

namespace {

constexpr std::uint64_t kInitialStream = 0;
constexpr std::uint64_t kProcessStream = 1;

std::vector<std::string> stateNames(const StateLayout& layout) {
  std::vector<std::string> names;
  for (const auto& s : layout.states) names.push_back(s.name);
  return names;
}

const TransitionStage& requireTransition(const ComposedSystem::Plan& plan) {
  if (plan.transition == nullptr) throw Error(ErrorCode::ConfigError, "scenario has no transition model");
  return *plan.transition;
}

}  // namespace

bool measuredAt(const ScenarioConfig& config, std::size_t k) {
  if (k == 0 || k % config.measurementPeriod != 0) return false;
  return std::find(config.droppedMeasurements.begin(), config.droppedMeasurements.end(), k) ==
         config.droppedMeasurements.end();
}

Trajectory simulateTrajectory(const ScenarioConfig& config, const ScenarioSystem& system) {
  Trajectory t;
  t.stateNames = stateNames(system.layout);
  t.outputDim = system.outputDim;
  const Eigen::Index n = system.layout.size();

  const Matrix root = gaussianSqrt(system.initial.cov());
  Vector x = system.initial.mean() + root * rng::normalVector(rng::deriveSeed(config.seeds.truth, kInitialStream), 0, n);
  t.states.push_back(x);
  t.measurements.emplace_back(std::nullopt);

  const auto& model = system.model;
  const std::uint64_t processSeed = rng::deriveSeed(config.seeds.truth, kProcessStream);
  for (std::size_t k = 1; k <= config.steps; ++k) {
    const auto plan = system.composed.stepPlan(k - 1);
    const auto& split = requireTransition(plan).split;
    const Vector w = model.transitionA.noise.sample(processSeed, k);
    const Vector next = model.transitionA.f(split.active() * x, w);
    x = split.invActive() * next + split.invInactive() * (split.inactive() * x);
    t.states.push_back(x);
    if (plan.output != nullptr && measuredAt(config, k)) {
      const Vector v = model.outputA.noise.sample(config.seeds.noise, k);
      t.measurements.emplace_back(model.outputA.h(plan.output->split.active() * x, v));
    } else {
      t.measurements.emplace_back(std::nullopt);
    }
  }
  return t;
}

VariantRun runVariant(const VariantConfig& variant, const ScenarioSystem& system,
                      const Trajectory& trajectory, const Seeds& seeds) {
  VariantRun run;
  run.name = variant.name;
  run.estimates.push_back(system.initial);
  run.flags.emplace_back();
  const auto& model = system.model;
  const auto start = std::chrono::steady_clock::now();

  StepConfig cfg = variant.step;
  if (!variant.baseline) {
    if (!cfg.predictPartition) cfg.predictPartition = model.predictPartition;
    if (!cfg.updatePartition) cfg.updatePartition = model.updatePartition;
  } else if (*variant.baseline == Baseline::Kalman && !(model.transitionD && model.outputD)) {
    throw Error(ErrorCode::ConfigError,
                "variant '" + variant.name + "': the kalman baseline needs a linear-Gaussian model");
  }

  GaussianBelief belief = system.initial;
  for (std::size_t k = 1; k <= trajectory.steps(); ++k) {
    const auto plan = system.composed.stepPlan(k - 1);
    const auto& y = trajectory.measurements[k];
    StepFlags flags;
    if (variant.baseline) {
      const auto& ts = requireTransition(plan).split;
      switch (*variant.baseline) {
        case Baseline::Kalman:
          belief = kalmanPredict(belief, ts, *model.transitionD);
          if (y && plan.output) belief = kalmanUpdate(belief, plan.output->split, *model.outputD, *y);
          break;
        case Baseline::Ekf:
          belief = ekfPredict(belief, ts, model.transitionA);
          if (y && plan.output) belief = ekfUpdate(belief, plan.output->split, model.outputA, *y);
          break;
        case Baseline::Ukf:
          belief = ukfPredict(belief, ts, model.transitionA);
          if (y && plan.output) belief = ukfUpdate(belief, plan.output->split, model.outputA, *y);
          break;
      }
    } else {
      std::optional<TransitionStage> ts;
      std::optional<OutputStage> os;
      if (plan.transition) ts = TransitionStage{plan.transition->split, model.transitionFor(cfg.predictLevel)};
      if (plan.output) os = OutputStage{plan.output->split, model.outputFor(cfg.updateLevel)};
      const auto report = step(belief, ts ? &*ts : nullptr, os ? &*os : nullptr, y, cfg,
                               rng::deriveSeed(seeds.rules, k));
      belief = report.updated;
      flags = report.flags;
    }
    run.estimates.push_back(belief);
    run.flags.push_back(flags);
  }
  run.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void applyOverrides(ScenarioConfig& config, const CommandOptions& options) {
  if (options.seed) {
    config.seeds.truth = rng::deriveSeed(*options.seed, 0);
    config.seeds.noise = rng::deriveSeed(*options.seed, 1);
    config.seeds.rules = rng::deriveSeed(*options.seed, 2);
  }
  if (options.outDir) config.outputDir = *options.outDir;
}

namespace {

struct Prepared {
  ScenarioConfig config;
  ScenarioSystem system;
  Trajectory trajectory;
};

Prepared prepare(const CommandOptions& options) {
  Prepared p;
  p.config = loadScenario(options.configPath);
  applyOverrides(p.config, options);
  if (options.variant) {
    auto& vs = p.config.variants;
    const auto keep = [&](const VariantConfig& v) {
      return v.name == *options.variant || (p.config.reference && v.name == *p.config.reference);
    };
    if (std::none_of(vs.begin(), vs.end(), [&](const auto& v) { return v.name == *options.variant; })) {
      throw Error(ErrorCode::ConfigError, "no variant named '" + *options.variant + "'");
    }
    vs.erase(std::remove_if(vs.begin(), vs.end(), [&](const auto& v) { return !keep(v); }), vs.end());
  }
  p.system = buildSystem(p.config);
  if (p.config.trajectoryPath) {
    p.trajectory = readTrajectoryCsv(*p.config.trajectoryPath, stateNames(p.system.layout), p.system.outputDim);
  } else {
    p.trajectory = simulateTrajectory(p.config, p.system);
  }
  std::filesystem::create_directories(p.config.outputDir);
  return p;
}

std::string outPath(const ScenarioConfig& c, const std::string& file) {
  return (std::filesystem::path(c.outputDir) / file).string();
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.isConfigError() ? kExitConfig : kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

std::pair<Prepared, std::vector<VariantRun>> runAll(const CommandOptions& options) {
  Prepared p = prepare(options);
  std::vector<VariantRun> runs;
  for (const auto& v : p.config.variants) runs.push_back(runVariant(v, p.system, p.trajectory, p.config.seeds));
  writeTrajectoryCsv(outPath(p.config, "trajectory.csv"), p.trajectory);
  for (const auto& r : runs) {
    writeEstimatesCsv(outPath(p.config, "estimates_" + r.name + ".csv"), p.trajectory.stateNames, r);
  }
  return {std::move(p), std::move(runs)};
}

}  // namespace

int commandSimulate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(options);
    const auto path = outPath(p.config, "trajectory.csv");
    writeTrajectoryCsv(path, p.trajectory);
    out << "wrote " << path << " (" << p.trajectory.steps() << " steps)\n";
    return kExitOk;
  });
}

int commandRun(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto [p, runs] = runAll(options);
    const auto report = computeMetrics(p.trajectory, runs, p.config.reference);
    writeMetricsJson(outPath(p.config, "metrics.json"), report);
    writeTimingJson(outPath(p.config, "timing.json"), runs);
    out << "ran " << runs.size() << " variant(s) over " << p.trajectory.steps() << " steps into "
        << p.config.outputDir << '\n';
    return kExitOk;
  });
}

int commandCompare(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto [p, runs] = runAll(options);
    const auto reference = p.config.reference.value_or(runs.front().name);
    const auto report = computeMetrics(p.trajectory, runs, reference);
    writeMetricsJson(outPath(p.config, "metrics.json"), report);
    writeTimingJson(outPath(p.config, "timing.json"), runs);

    std::ofstream csv(outPath(p.config, "comparison.csv"), std::ios::binary | std::ios::trunc);
    csv << "variant,mean_rmse,nees_mean,nees_low,nees_high,nees_consistent,max_mean_diff,max_cov_diff\n";
    out << "reference: " << reference << '\n';
    out << std::left << std::setw(20) << "variant" << std::setw(14) << "mean rmse" << std::setw(12)
        << "nees" << std::setw(12) << "consistent" << std::setw(14) << "max |dmean|" << "max |dcov|\n";
    for (const auto& m : report.variants) {
      double avg = 0.0;
      for (double r : m.rmse) avg += r;
      avg /= static_cast<double>(m.rmse.size());
      csv << m.name << ',' << formatNumber(avg) << ',' << formatNumber(m.neesMean) << ','
          << formatNumber(m.neesBounds.low) << ',' << formatNumber(m.neesBounds.high) << ','
          << int(m.neesConsistent) << ',' << formatNumber(m.maxMeanDiff.value_or(0.0)) << ','
          << formatNumber(m.maxCovDiff.value_or(0.0)) << '\n';
      out << std::setw(20) << m.name << std::setw(14) << std::setprecision(6) << avg << std::setw(12)
          << m.neesMean << std::setw(12) << (m.neesConsistent ? "yes" : "no") << std::setw(14)
          << m.maxMeanDiff.value_or(0.0) << m.maxCovDiff.value_or(0.0) << '\n';
    }
    return kExitOk;
  });
}

int commandSelftest(std::ostream& out) {
  const auto results = runAcceptance();
  bool ok = true;
  for (const auto& r : results) {
    out << formatResult(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace mbf::harness
