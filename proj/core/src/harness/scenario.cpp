#include "mbf/harness/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mbf::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

const json& requireObject(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  return j;
}

void allowKeys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  requireObject(j, where);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) fail(where, "unknown key '" + k + "'");
  }
}

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where, std::string("missing required key '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

std::uint64_t unsignedInt(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) fail(where, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string string(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

Vector numberArray(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

std::vector<int> indexArray(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of row indices");
  std::vector<int> out;
  for (const auto& e : j) out.push_back(static_cast<int>(unsignedInt(e, where)));
  return out;
}

IntegrationRule parseRule(const json& j, const std::string& where) {
  requireObject(j, where);
  const std::string kind = string(member(j, "kind", where), where + ".kind");
  IntegrationRule rule;
  if (kind == "gauss_hermite") {
    allowKeys(j, where, {"kind", "degree", "node_budget", "fallback_count"});
    const auto degree = j.contains("degree") ? unsignedInt(j["degree"], where + ".degree") : 5;
    if (degree < 1 || degree > 200) fail(where + ".degree", "must be between 1 and 200");
    rule = IntegrationRule::gaussHermite(static_cast<int>(degree));
  } else if (kind == "unscented") {
    allowKeys(j, where, {"kind", "kappa", "node_budget", "fallback_count"});
    std::optional<double> kappa;
    if (j.contains("kappa")) {
      kappa = number(j["kappa"], where + ".kappa");
      if (*kappa < 0.0) fail(where + ".kappa", "must be >= 0");
    }
    rule = IntegrationRule::unscented(kappa);
  } else if (kind == "monte_carlo") {
    allowKeys(j, where, {"kind", "count", "seed", "node_budget", "fallback_count"});
    const auto count = j.contains("count") ? unsignedInt(j["count"], where + ".count") : 10000;
    if (count < 2) fail(where + ".count", "must be >= 2");
    const auto seed = j.contains("seed") ? unsignedInt(j["seed"], where + ".seed") : 0;
    rule = IntegrationRule::monteCarlo(count, seed);
  } else {
    fail(where + ".kind", "unknown rule '" + kind + "' (gauss_hermite, unscented, monte_carlo)");
  }
  if (j.contains("node_budget")) rule.nodeBudget = unsignedInt(j["node_budget"], where + ".node_budget");
  if (j.contains("fallback_count")) {
    rule.fallbackCount = unsignedInt(j["fallback_count"], where + ".fallback_count");
    if (rule.fallbackCount < 2) fail(where + ".fallback_count", "must be >= 2");
  }
  return rule;
}

KernelConfig parseKernel(const json& j, const std::string& where) {
  allowKeys(j, where, {"bandwidth", "z"});
  const std::string bw = j.contains("bandwidth") ? string(j["bandwidth"], where + ".bandwidth") : "silverman";
  if (bw == "silverman") {
    if (j.contains("z")) fail(where + ".z", "only valid with a fixed bandwidth");
    return KernelConfig::silverman();
  }
  if (bw != "fixed") fail(where + ".bandwidth", "expected 'silverman' or 'fixed'");
  const json& z = member(j, "z", where);
  if (!z.is_array() || z.empty()) fail(where + ".z", "expected a square matrix");
  const auto n = static_cast<Eigen::Index>(z.size());
  Matrix Z(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector row = numberArray(z[static_cast<std::size_t>(r)], where + ".z");
    if (row.size() != n) fail(where + ".z", "expected a square matrix");
    Z.row(r) = row.transpose();
  }
  return KernelConfig::fixed(Z);
}

RowPartition parsePartition(const json& j, const std::string& where) {
  allowKeys(j, where, {"nonlinear", "linear"});
  RowPartition p;
  p.nonlinear = indexArray(member(j, "nonlinear", where), where + ".nonlinear");
  if (j.contains("linear")) p.linear = indexArray(j["linear"], where + ".linear");
  return p;
}

PredictLevel parsePredictLevel(const json& j, const std::string& where) {
  const std::string s = string(j, where);
  if (s == "a") return PredictLevel::A;
  if (s == "b") return PredictLevel::B;
  if (s == "c") return PredictLevel::C;
  if (s == "d") return PredictLevel::D;
  fail(where, "expected one of a, b, c, d");
}

UpdateLevel parseUpdateLevel(const json& j, const std::string& where) {
  const std::string s = string(j, where);
  if (s == "a-kde") return UpdateLevel::AKde;
  if (s == "a-likelihood") return UpdateLevel::ALikelihood;
  if (s == "a-parametric") return UpdateLevel::AParametric;
  if (s == "b") return UpdateLevel::B;
  if (s == "c") return UpdateLevel::C;
  if (s == "d") return UpdateLevel::D;
  fail(where, "expected one of a-kde, a-likelihood, a-parametric, b, c, d");
}

VariantConfig parseVariant(const json& j, const std::string& where) {
  requireObject(j, where);
  VariantConfig v;
  v.name = string(member(j, "name", where), where + ".name");
  if (v.name.empty()) fail(where + ".name", "must not be empty");
  if (j.contains("baseline")) {
    allowKeys(j, where, {"name", "baseline"});
    const std::string b = string(j["baseline"], where + ".baseline");
    if (b == "kalman") v.baseline = Baseline::Kalman;
    else if (b == "ekf") v.baseline = Baseline::Ekf;
    else if (b == "ukf") v.baseline = Baseline::Ukf;
    else fail(where + ".baseline", "expected kalman, ekf or ukf");
    return v;
  }
  allowKeys(j, where,
            {"name", "predict", "update", "rule", "update_rule", "kernel", "noise_rule",
             "degenerate_policy", "predict_partition", "update_partition", "jacobian_step"});
  StepConfig& s = v.step;
  if (j.contains("predict")) s.predictLevel = parsePredictLevel(j["predict"], where + ".predict");
  if (j.contains("update")) s.updateLevel = parseUpdateLevel(j["update"], where + ".update");
  if (j.contains("rule")) s.predictRule = s.updateRule = parseRule(j["rule"], where + ".rule");
  if (j.contains("update_rule")) s.updateRule = parseRule(j["update_rule"], where + ".update_rule");
  if (j.contains("kernel")) s.kernel = parseKernel(j["kernel"], where + ".kernel");
  if (j.contains("noise_rule")) s.kdeNoiseRule = parseRule(j["noise_rule"], where + ".noise_rule");
  if (j.contains("degenerate_policy")) {
    const std::string p = string(j["degenerate_policy"], where + ".degenerate_policy");
    if (p == "error") s.degeneratePolicy = DegeneratePolicy::Error;
    else if (p == "keep_prior") s.degeneratePolicy = DegeneratePolicy::KeepPrior;
    else fail(where + ".degenerate_policy", "expected 'error' or 'keep_prior'");
  }
  if (j.contains("predict_partition")) {
    s.predictPartition = parsePartition(j["predict_partition"], where + ".predict_partition");
  }
  if (j.contains("update_partition")) {
    s.updatePartition = parsePartition(j["update_partition"], where + ".update_partition");
  }
  if (j.contains("jacobian_step")) {
    s.jacobianStep = number(j["jacobian_step"], where + ".jacobian_step");
    if (!(s.jacobianStep > 0.0)) fail(where + ".jacobian_step", "must be positive");
  }
  return v;
}

}  // namespace

ScenarioConfig parseScenario(const std::string& jsonText) {
  json root;
  try {
    root = json::parse(jsonText);
  } catch (const json::parse_error& e) {
    fail("config", std::string("invalid JSON: ") + e.what());
  }
  allowKeys(root, "config",
            {"schema", "model", "layout", "steps", "seeds", "initial", "measurements", "trajectory",
             "variants", "reference", "output"});
  const json& schema = member(root, "schema", "config");
  if (!schema.is_number_integer() || schema.get<long long>() != kSchemaVersion) {
    fail("config.schema", "unsupported schema version (expected 1)");
  }

  ScenarioConfig c;
  const json& model = member(root, "model", "config");
  allowKeys(model, "model", {"key", "params"});
  c.modelKey = string(member(model, "key", "model"), "model.key");
  if (model.contains("params")) {
    requireObject(model["params"], "model.params");
    for (const auto& [k, v] : model["params"].items()) {
      c.modelParams.values[k] = number(v, "model.params." + k);
    }
  }

  if (root.contains("layout")) {
    const json& layout = root["layout"];
    allowKeys(layout, "layout", {"states", "units"});
    const json& states = member(layout, "states", "layout");
    if (!states.is_array() || states.empty()) fail("layout.states", "expected a non-empty array");
    for (std::size_t i = 0; i < states.size(); ++i) {
      const std::string w = "layout.states[" + std::to_string(i) + "]";
      allowKeys(states[i], w, {"name", "unit", "mean", "std"});
      LayoutState s;
      s.name = string(member(states[i], "name", w), w + ".name");
      s.unit = states[i].contains("unit") ? string(states[i]["unit"], w + ".unit") : "";
      if (states[i].contains("mean")) s.mean = number(states[i]["mean"], w + ".mean");
      if (states[i].contains("std")) s.std = number(states[i]["std"], w + ".std");
      if (s.std < 0.0) fail(w + ".std", "must be >= 0");
      c.layout.push_back(s);
    }
    if (layout.contains("units")) {
      const json& units = layout["units"];
      if (!units.is_array()) fail("layout.units", "expected an array");
      for (std::size_t i = 0; i < units.size(); ++i) {
        const std::string w = "layout.units[" + std::to_string(i) + "]";
        allowKeys(units[i], w, {"from", "to", "scale"});
        UnitConversion u{string(member(units[i], "from", w), w + ".from"),
                         string(member(units[i], "to", w), w + ".to"),
                         number(member(units[i], "scale", w), w + ".scale")};
        if (!(u.scale > 0.0)) fail(w + ".scale", "must be positive");
        c.units.push_back(u);
      }
    }
  }

  if (root.contains("steps")) {
    c.steps = unsignedInt(root["steps"], "steps");
    if (c.steps < 1) fail("steps", "must be >= 1");
  }
  if (root.contains("seeds")) {
    const json& s = root["seeds"];
    allowKeys(s, "seeds", {"truth", "noise", "rules"});
    if (s.contains("truth")) c.seeds.truth = unsignedInt(s["truth"], "seeds.truth");
    if (s.contains("noise")) c.seeds.noise = unsignedInt(s["noise"], "seeds.noise");
    if (s.contains("rules")) c.seeds.rules = unsignedInt(s["rules"], "seeds.rules");
  }
  if (root.contains("initial")) {
    const json& init = root["initial"];
    allowKeys(init, "initial", {"mean", "std"});
    if (init.contains("mean")) c.initialMean = numberArray(init["mean"], "initial.mean");
    if (init.contains("std")) {
      c.initialStd = numberArray(init["std"], "initial.std");
      if ((c.initialStd->array() < 0.0).any()) fail("initial.std", "entries must be >= 0");
    }
    if (!c.layout.empty()) fail("initial", "with a layout, give initial values per layout state");
  }
  if (root.contains("measurements")) {
    const json& m = root["measurements"];
    allowKeys(m, "measurements", {"period", "drop"});
    if (m.contains("period")) {
      c.measurementPeriod = unsignedInt(m["period"], "measurements.period");
      if (c.measurementPeriod < 1) fail("measurements.period", "must be >= 1");
    }
    if (m.contains("drop")) {
      for (int k : indexArray(m["drop"], "measurements.drop")) c.droppedMeasurements.push_back(k);
    }
  }
  if (root.contains("trajectory")) c.trajectoryPath = string(root["trajectory"], "trajectory");

  const json& variants = member(root, "variants", "config");
  if (!variants.is_array() || variants.empty()) fail("variants", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    auto v = parseVariant(variants[i], "variants[" + std::to_string(i) + "]");
    if (!names.insert(v.name).second) fail("variants", "duplicate variant name '" + v.name + "'");
    c.variants.push_back(std::move(v));
  }
  if (root.contains("reference")) {
    c.reference = string(root["reference"], "reference");
    if (!names.count(*c.reference)) fail("reference", "no variant named '" + *c.reference + "'");
  }
  if (root.contains("output")) {
    allowKeys(root["output"], "output", {"dir"});
    if (root["output"].contains("dir")) c.outputDir = string(root["output"]["dir"], "output.dir");
  }

  // Model-level checks that need no numerics.
  const RegisteredModel probe = makeModel(c.modelKey, c.modelParams);
  if (c.layout.empty()) {
    const auto n = probe.layout.size();
    if (c.initialMean && c.initialMean->size() != n) fail("initial.mean", "wrong length for the model state");
    if (c.initialStd && c.initialStd->size() != n) fail("initial.std", "wrong length for the model state");
  }
  return c;
}

ScenarioConfig loadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScenario(ss.str());
}

ScenarioSystem buildSystem(const ScenarioConfig& config) {
  ScenarioSystem sys;
  sys.model = makeModel(config.modelKey, config.modelParams);
  sys.units = UnitTable::siDefaults();
  for (const auto& u : config.units) sys.units.add(u.from, u.to, u.scale);

  Vector mean, std;
  if (config.layout.empty()) {
    sys.layout = sys.model.layout;
    mean = config.initialMean.value_or(sys.model.initialMean);
    std = config.initialStd.value_or(sys.model.initialStd);
  } else {
    const auto n = static_cast<Eigen::Index>(config.layout.size());
    mean.resize(n);
    std.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = config.layout[static_cast<std::size_t>(i)];
      sys.layout.states.push_back({s.name, s.unit});
      mean(i) = s.mean;
      std(i) = s.std;
    }
  }
  sys.composed = composeSystem(sys.layout,
                               {{sys.model.key, sys.model.transitionBinding, sys.model.transitionA}},
                               {{sys.model.key, sys.model.outputBinding, sys.model.outputA}}, sys.units);
  sys.initial = GaussianBelief(mean, Matrix(std.array().square().matrix().asDiagonal()));
  sys.outputDim = sys.model.outputA.dimOutput;
  return sys;
}

}  // namespace mbf::harness
