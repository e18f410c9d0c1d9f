#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbf/harness/io.hpp"
#include "mbf/harness/metrics.hpp"
#include "mbf/harness/registry.hpp"
#include "mbf/harness/runner.hpp"
#include "mbf/harness/scenario.hpp"
#include "test_util.hpp"

using namespace mbf;
using namespace mbf::harness;
using test::scalar;
using test::vec;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({
  "schema": 1,
  "model": {"key": "linear_scalar"},
  "steps": 5,
  "variants": [{"name": "kf", "baseline": "kalman"}]
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

void expectConfigError(const nlohmann::json& j, const std::string& fragment) {
  try {
    parseScenario(j.dump());
    ADD_FAILURE() << "accepted: " << j.dump();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

fs::path scratchDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mbf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path writeConfig(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string configPath(const std::string& name) { return std::string(MBF_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(Scenario, ParsesMinimalConfigWithDefaults) {
  const auto c = parseScenario(kMinimal);
  EXPECT_EQ(c.modelKey, "linear_scalar");
  EXPECT_EQ(c.steps, 5u);
  ASSERT_EQ(c.variants.size(), 1u);
  EXPECT_EQ(c.variants[0].baseline, Baseline::Kalman);
  EXPECT_EQ(c.measurementPeriod, 1u);
  EXPECT_FALSE(c.reference.has_value());
}

TEST(Scenario, ParsesVariantSettings) {
  auto j = minimal();
  j["variants"].push_back({{"name", "c"},
                           {"predict", "a"},
                           {"update", "a-kde"},
                           {"rule", {{"kind", "monte_carlo"}, {"count", 50}, {"seed", 4}}},
                           {"update_rule", {{"kind", "unscented"}, {"kappa", 1.5}}},
                           {"kernel", {{"bandwidth", "fixed"}, {"z", {{0.25}}}}},
                           {"degenerate_policy", "error"}});
  j["reference"] = "kf";
  const auto c = parseScenario(j.dump());
  const auto& s = c.variants[1].step;
  EXPECT_EQ(s.predictLevel, PredictLevel::A);
  EXPECT_EQ(s.updateLevel, UpdateLevel::AKde);
  EXPECT_TRUE(s.predictRule.isSampleBased());
  EXPECT_EQ(std::get<Unscented>(s.updateRule.kind).kappa, 1.5);
  EXPECT_EQ(s.kernel.bandwidth, KernelConfig::Bandwidth::Fixed);
  EXPECT_EQ(s.degeneratePolicy, DegeneratePolicy::Error);
  EXPECT_EQ(c.reference, "kf");
}

TEST(Scenario, RejectsUnknownKeysEverywhere) {
  auto top = minimal();
  top["stepz"] = 3;
  expectConfigError(top, "stepz");
  auto model = minimal();
  model["model"]["extra"] = 1;
  expectConfigError(model, "extra");
  auto variant = minimal();
  variant["variants"][0]["predict"] = "d";  // not allowed next to a baseline
  expectConfigError(variant, "predict");
  auto seeds = minimal();
  seeds["seeds"] = {{"truth", 1}, {"nose", 2}};
  expectConfigError(seeds, "nose");
  auto rule = minimal();
  rule["variants"].push_back({{"name", "x"}, {"rule", {{"kind", "gauss_hermite"}, {"count", 3}}}});
  expectConfigError(rule, "count");
}

TEST(Scenario, RejectsBadValues) {
  auto schema = minimal();
  schema["schema"] = 2;
  expectConfigError(schema, "schema");
  auto noSchema = minimal();
  noSchema.erase("schema");
  expectConfigError(noSchema, "schema");
  auto type = minimal();
  type["steps"] = "five";
  expectConfigError(type, "steps");
  auto zero = minimal();
  zero["steps"] = 0;
  expectConfigError(zero, "steps");
  auto key = minimal();
  key["model"]["key"] = "warp_drive";
  expectConfigError(key, "warp_drive");
  auto param = minimal();
  param["model"]["params"] = {{"colour", 1.0}};
  expectConfigError(param, "colour");
  auto ref = minimal();
  ref["reference"] = "ghost";
  expectConfigError(ref, "ghost");
  auto dup = minimal();
  dup["variants"].push_back({{"name", "kf"}, {"baseline", "ekf"}});
  expectConfigError(dup, "duplicate");
  auto empty = minimal();
  empty["variants"] = nlohmann::json::array();
  expectConfigError(empty, "variants");
  auto level = minimal();
  level["variants"].push_back({{"name", "x"}, {"update", "e"}});
  expectConfigError(level, "update");
  auto init = minimal();
  init["initial"] = {{"mean", {1.0, 2.0}}};
  expectConfigError(init, "initial.mean");
  auto stdev = minimal();
  stdev["initial"] = {{"std", {-1.0}}};
  expectConfigError(stdev, "initial.std");
  EXPECT_ERROR_CODE(parseScenario("{not json"), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(loadScenario("/nonexistent/config.json"), ErrorCode::ConfigError);
}

TEST(Scenario, ShippedConfigsParseAndBuild) {
  for (const auto& entry : fs::directory_iterator(MBF_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    const auto c = loadScenario(entry.path().string());
    const auto sys = buildSystem(c);
    EXPECT_GT(sys.layout.size(), 0);
  }
}

TEST(Scenario, SupersetLayoutEmbedsModel) {
  const auto c = loadScenario(configPath("pendulum_superset.json"));
  const auto sys = buildSystem(c);
  EXPECT_EQ(sys.layout.size(), 4);
  EXPECT_NEAR(sys.initial.mean()(2), 30.0, 0.0);
  EXPECT_NEAR(sys.initial.cov()(1, 1), 400.0, 1e-12);
  const auto plan = sys.composed.stepPlan(0);
  ASSERT_NE(plan.transition, nullptr);
  // Cart and wheel are never referenced, so they sit in the inactive block.
  EXPECT_EQ(plan.transition->split.activeDim(), 2);
  EXPECT_DOUBLE_EQ(plan.transition->split.active()(0, 2), M_PI / 180.0);
}

TEST(Registry, EveryModelBuildsAndHonoursLevels) {
  const auto keys = registeredModelKeys();
  EXPECT_GE(keys.size(), 5u);
  for (const auto& k : keys) {
    SCOPED_TRACE(k);
    const auto m = makeModel(k, {});
    EXPECT_EQ(m.initialMean.size(), m.layout.size());
    EXPECT_EQ(m.initialStd.size(), m.layout.size());
    EXPECT_TRUE(static_cast<bool>(m.transitionA.f));
    EXPECT_TRUE(static_cast<bool>(m.outputA.h));
    EXPECT_TRUE(std::holds_alternative<TransitionModelA>(m.transitionFor(PredictLevel::A)));
  }
  const auto lin = makeModel("linear_scalar", {});
  EXPECT_TRUE(std::holds_alternative<TransitionModelD>(lin.transitionFor(PredictLevel::D)));
  EXPECT_TRUE(std::holds_alternative<OutputModelD>(lin.outputFor(UpdateLevel::D)));
  EXPECT_ERROR_CODE(makeModel("nope", {}), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(makeModel("linear_scalar", ModelParams{{{"r", -1.0}}}), ErrorCode::ConfigError);
}

TEST(Runner, MeasurementSchedule) {
  ScenarioConfig c;
  c.measurementPeriod = 2;
  c.droppedMeasurements = {4};
  EXPECT_FALSE(measuredAt(c, 0));
  EXPECT_FALSE(measuredAt(c, 1));
  EXPECT_TRUE(measuredAt(c, 2));
  EXPECT_FALSE(measuredAt(c, 4));
  EXPECT_TRUE(measuredAt(c, 6));
}

TEST(Simulate, ZeroNoiseIdentityDynamicsIsConstant) {
  auto c = parseScenario(kMinimal);
  c.modelParams.values = {{"a", 1.0}, {"q", 0.0}};
  c.steps = 20;
  const auto t = simulateTrajectory(c, buildSystem(c));
  ASSERT_EQ(t.states.size(), 21u);
  for (const auto& x : t.states) EXPECT_EQ(x, t.states[0]);
  EXPECT_FALSE(t.measurements[0].has_value());
  EXPECT_TRUE(t.measurements[1].has_value());
}

TEST(Simulate, SeedDeterminism) {
  auto c = loadScenario(configPath("pendulum.json"));
  const auto sys = buildSystem(c);
  const auto a = simulateTrajectory(c, sys);
  const auto b = simulateTrajectory(c, sys);
  for (std::size_t k = 0; k < a.states.size(); ++k) EXPECT_EQ(a.states[k], b.states[k]);
  c.seeds.truth += 1;
  EXPECT_NE(simulateTrajectory(c, sys).states[5], a.states[5]);
}

// Oracle: the stationary variance q / (1 - a^2) of x' = a x + w.
TEST(Simulate, LinearScalarMatchesLyapunov) {
  auto c = parseScenario(kMinimal);
  const double a = 0.5, q = 2.0;
  c.modelParams.values = {{"a", a}, {"q", q}, {"p0", q / (1 - a * a)}};
  c.steps = 10000;
  const auto t = simulateTrajectory(c, buildSystem(c));
  double s = 0, s2 = 0;
  for (const auto& x : t.states) {
    s += x(0);
    s2 += x(0) * x(0);
  }
  const double n = static_cast<double>(t.states.size());
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var / (q / (1 - a * a)), 1.0, 0.05);
}

TEST(Io, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, M_PI}) {
    EXPECT_EQ(std::stod(formatNumber(v)), v);
  }
  EXPECT_EQ(formatNumber(0.1), "0.10000000000000001");
}

TEST(Io, TrajectoryCsvRoundTrip) {
  const auto dir = scratchDir("io");
  Trajectory t;
  t.stateNames = {"a", "b"};
  t.outputDim = 1;
  t.states = {vec({0.1, 1.0 / 3}), vec({2, -1e-17}), vec({3, 4})};
  t.measurements = {std::nullopt, std::nullopt, vec({M_PI})};
  const auto path = (dir / "t.csv").string();
  writeTrajectoryCsv(path, t);
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,a,b,y0");
  const auto back = readTrajectoryCsv(path, {"a", "b"}, 1);
  ASSERT_EQ(back.states.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back.states[k], t.states[k]);
  EXPECT_FALSE(back.measurements[1].has_value());
  EXPECT_EQ((*back.measurements[2])(0), M_PI);
  EXPECT_ERROR_CODE(readTrajectoryCsv(path, {"a", "c"}, 1), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(readTrajectoryCsv(path, {"a", "b"}, 2), ErrorCode::ConfigError);

  std::ofstream(dir / "bad.csv") << "step,a,y0,y1\n0,1,,\n1,2,3,\n";
  EXPECT_ERROR_CODE(readTrajectoryCsv((dir / "bad.csv").string(), {"a"}, 2), ErrorCode::ConfigError);
  std::ofstream(dir / "nan.csv") << "step,a,y0\n0,1,\n1,abc,2\n";
  EXPECT_ERROR_CODE(readTrajectoryCsv((dir / "nan.csv").string(), {"a"}, 1), ErrorCode::ConfigError);
  std::ofstream(dir / "gap.csv") << "step,a,y0\n0,1,\n2,1,2\n";
  EXPECT_ERROR_CODE(readTrajectoryCsv((dir / "gap.csv").string(), {"a"}, 1), ErrorCode::ConfigError);
}

TEST(Metrics, NeesIntervalMatchesTables) {
  // Chi-square(1) quantiles 0.025 and 0.975.
  const auto one = neesInterval(1, 1);
  EXPECT_NEAR(one.low, 0.000982069, 1e-9);
  EXPECT_NEAR(one.high, 5.02388619, 1e-8);
  // Chi-square(100): 74.2219 and 129.5612, averaged over 50 steps.
  const auto avg = neesInterval(2, 50);
  EXPECT_NEAR(avg.low, 74.2219 / 50, 1e-5);
  EXPECT_NEAR(avg.high, 129.5612 / 50, 1e-5);
  EXPECT_ERROR_CODE(neesInterval(0, 5), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(neesInterval(1, 5, 1.0), ErrorCode::InvalidArgument);
}

TEST(Metrics, NeesAndRmse) {
  const GaussianBelief b(vec({1, 0}), (Matrix(2, 2) << 4, 0, 0, 1).finished());
  EXPECT_DOUBLE_EQ(nees(vec({3, 1}), b), 2.0);
  Trajectory t;
  t.stateNames = {"a", "b"};
  t.states = {vec({0, 0}), vec({3, 1}), vec({1, 0})};
  t.measurements.resize(3);
  VariantRun r{"v", {b, b, b}, {StepFlags{}, StepFlags{true, false, false, false}, StepFlags{}}, 0.0};
  const auto m = computeMetrics(t, {r}, std::string("v"));
  ASSERT_EQ(m.variants.size(), 1u);
  const auto& v = m.variants[0];
  EXPECT_NEAR(v.rmse[0], std::sqrt((4.0 + 0.0) / 2), 1e-15);
  EXPECT_NEAR(v.rmse[1], std::sqrt((1.0 + 0.0) / 2), 1e-15);
  EXPECT_DOUBLE_EQ(v.neesMean, 1.0);
  EXPECT_EQ(v.flags.jitter, 1u);
  EXPECT_EQ(*v.maxMeanDiff, 0.0);
  for (double e : v.neesPerStep) EXPECT_GE(e, 0.0);
}

TEST(Runner, LevelDMatchesKalmanBaseline) {
  const auto c = loadScenario(configPath("linear_scalar.json"));
  const auto sys = buildSystem(c);
  const auto t = simulateTrajectory(c, sys);
  const auto kf = runVariant(c.variants[0], sys, t, c.seeds);
  const auto md = runVariant(c.variants[1], sys, t, c.seeds);
  ASSERT_EQ(kf.estimates.size(), t.states.size());
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    EXPECT_MAT_NEAR(kf.estimates[k].mean(), md.estimates[k].mean(), 1e-9);
    EXPECT_MAT_NEAR(kf.estimates[k].cov(), md.estimates[k].cov(), 1e-9);
  }
  // Dropped measurements are predict-only: the variance grows there.
  EXPECT_FALSE(t.measurements[21].has_value());
  EXPECT_GT(md.estimates[21].cov()(0, 0), md.estimates[20].cov()(0, 0));
}

TEST(Runner, KalmanBaselineNeedsLinearModel) {
  auto c = loadScenario(configPath("pendulum.json"));
  VariantConfig kf{"kf", Baseline::Kalman, {}};
  const auto sys = buildSystem(c);
  EXPECT_ERROR_CODE(runVariant(kf, sys, simulateTrajectory(c, sys), c.seeds), ErrorCode::ConfigError);
}

TEST(Runner, SeedOverrideDerivesThreeStreams) {
  ScenarioConfig c;
  CommandOptions o;
  o.seed = 99;
  o.outDir = "elsewhere";
  applyOverrides(c, o);
  EXPECT_NE(c.seeds.truth, c.seeds.noise);
  EXPECT_NE(c.seeds.noise, c.seeds.rules);
  EXPECT_EQ(c.outputDir, "elsewhere");
}

TEST(Cli, RunWritesArtifactsDeterministically) {
  const auto dir = scratchDir("cli_run");
  std::ostringstream out, err;
  CommandOptions o{configPath("linear_scalar.json"), std::nullopt, (dir / "one").string(), std::nullopt};
  ASSERT_EQ(commandRun(o, out, err), kExitOk) << err.str();
  o.outDir = (dir / "two").string();
  ASSERT_EQ(commandRun(o, out, err), kExitOk) << err.str();
  for (const char* f : {"trajectory.csv", "estimates_kalman.csv", "estimates_marginal_d.csv", "metrics.json"}) {
    SCOPED_TRACE(f);
    const auto one = slurp(dir / "one" / f);
    EXPECT_FALSE(one.empty());
    EXPECT_EQ(one, slurp(dir / "two" / f));
  }
  EXPECT_TRUE(fs::exists(dir / "one" / "timing.json"));
  const auto metrics = nlohmann::json::parse(slurp(dir / "one" / "metrics.json"));
  EXPECT_EQ(metrics["schema"], 1);
  EXPECT_LT(metrics["variants"][1]["max_diff_vs_reference"]["mean"].get<double>(), 1e-9);

  o.seed = 5;
  o.outDir = (dir / "three").string();
  ASSERT_EQ(commandRun(o, out, err), kExitOk);
  EXPECT_NE(slurp(dir / "one" / "trajectory.csv"), slurp(dir / "three" / "trajectory.csv"));
}

TEST(Cli, SimulateAndVariantFilter) {
  const auto dir = scratchDir("cli_sim");
  std::ostringstream out, err;
  CommandOptions o{configPath("cubic_output.json"), 7, dir.string(), std::nullopt};
  ASSERT_EQ(commandSimulate(o, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(dir / "metrics.json"));

  o.variant = "ukf";
  ASSERT_EQ(commandCompare(o, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "estimates_ukf.csv"));
  EXPECT_TRUE(fs::exists(dir / "estimates_ekf.csv"));  // the reference is kept
  EXPECT_FALSE(fs::exists(dir / "estimates_level_b.csv"));
  EXPECT_TRUE(fs::exists(dir / "comparison.csv"));

  o.variant = "ghost";
  EXPECT_EQ(commandCompare(o, out, err), kExitConfig);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratchDir("cli_exit");
  std::ostringstream out, err;
  EXPECT_EQ(commandRun({(dir / "missing.json").string(), {}, dir.string(), {}}, out, err), kExitConfig);

  auto unknown = minimal();
  unknown["colour"] = "blue";
  EXPECT_EQ(commandRun({writeConfig(dir, unknown).string(), {}, dir.string(), {}}, out, err), kExitConfig);
  EXPECT_FALSE(fs::exists(dir / "trajectory.csv"));  // rejected before any computation

  // A measurement far outside the prior with the error policy.
  std::ofstream(dir / "traj.csv") << "step,x,y0\n0,0,\n1,0,1000\n";
  auto numerical = minimal();
  numerical["trajectory"] = (dir / "traj.csv").string();
  numerical["variants"] = {{{"name", "strict"},
                            {"predict", "d"},
                            {"update", "a-likelihood"},
                            {"degenerate_policy", "error"}}};
  EXPECT_EQ(commandRun({writeConfig(dir, numerical).string(), {}, dir.string(), {}}, out, err), kExitNumerical);
  EXPECT_NE(err.str().find("DegenerateUpdate"), std::string::npos) << err.str();
}
