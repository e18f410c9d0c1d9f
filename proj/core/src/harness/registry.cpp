#include "mbf/harness/registry.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "mbf/rng.hpp"

namespace mbf::harness {

double ModelParams::get(const std::string& name, double fallback) const {
  const auto it = values.find(name);
  return it == values.end() ? fallback : it->second;
}

TransitionModel RegisteredModel::transitionFor(PredictLevel level) const {
  switch (level) {
    case PredictLevel::D:
      if (transitionD) return *transitionD;
      [[fallthrough]];
    case PredictLevel::C:
      if (transitionC) return *transitionC;
      [[fallthrough]];
    case PredictLevel::B:
      if (transitionB) return *transitionB;
      [[fallthrough]];
    case PredictLevel::A:
      break;
  }
  return transitionA;
}

OutputModel RegisteredModel::outputFor(UpdateLevel level) const {
  switch (level) {
    case UpdateLevel::D:
      if (outputD) return *outputD;
      [[fallthrough]];
    case UpdateLevel::C:
      if (outputC) return *outputC;
      [[fallthrough]];
    case UpdateLevel::B:
      if (outputB) return *outputB;
      [[fallthrough]];
    default:
      break;
  }
  return outputA;
}

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

void checkParams(const std::string& key, const ModelParams& p, std::set<std::string> allowed) {
  for (const auto& [name, value] : p.values) {
    if (!allowed.count(name)) {
      throw Error(ErrorCode::ConfigError, "model '" + key + "' has no parameter '" + name + "'");
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::ConfigError, "parameter '" + name + "' must be finite");
    }
  }
}

double positive(const ModelParams& p, const std::string& name, double fallback) {
  const double v = p.get(name, fallback);
  if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "parameter '" + name + "' must be positive");
  return v;
}

double nonNegative(const ModelParams& p, const std::string& name, double fallback) {
  const double v = p.get(name, fallback);
  if (!(v >= 0.0)) throw Error(ErrorCode::ConfigError, "parameter '" + name + "' must be >= 0");
  return v;
}

SubmodelBinding bindAll(const StateLayout& layout, const std::vector<int>& rows) {
  SubmodelBinding b;
  for (int r : rows) b.states.push_back({layout.states[r].name, layout.states[r].unit, {}});
  return b;
}

// y = x + v, v ~ N(0, r), shared by the scalar models.
void linearScalarParts(RegisteredModel& m, double a, double q) {
  m.layout.states = {{"x", "m"}};
  m.transitionBinding = bindAll(m.layout, {0});
  m.outputBinding = bindAll(m.layout, {0});
  m.transitionA.dimActive = 1;
  m.transitionA.noise = NoiseModel::gaussianNoise(scalar(q));
  m.transitionA.f = [a](const Vector& x, const Vector& w) -> Vector { return a * x + w; };
  m.transitionA.dfdx = [a](const Vector&, const Vector&) { return scalar(a); };
  m.transitionA.dfdw = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.transitionD = TransitionModelD{Vector::Zero(1), scalar(a), scalar(1.0), scalar(q)};
}

RegisteredModel linearScalar(const ModelParams& p) {
  checkParams("linear_scalar", p, {"a", "q", "r", "x0", "p0"});
  RegisteredModel m;
  m.key = "linear_scalar";
  const double a = p.get("a", 0.9), q = nonNegative(p, "q", 1.0), r = positive(p, "r", 1.0);
  linearScalarParts(m, a, q);
  m.initialMean = vec1(p.get("x0", 0.0));
  m.initialStd = vec1(std::sqrt(positive(p, "p0", 1.0)));
  m.outputA.dimActive = 1;
  m.outputA.dimOutput = 1;
  m.outputA.noise = NoiseModel::gaussianNoise(scalar(r));
  m.outputA.h = [](const Vector& x, const Vector& v) -> Vector { return x + v; };
  m.outputA.dhdx = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.outputA.likelihood = [r](const Vector& y, const Vector& x) {
    return std::exp(-0.5 * (y(0) - x(0)) * (y(0) - x(0)) / r);
  };
  m.outputD = OutputModelD{Vector::Zero(1), scalar(1.0), scalar(1.0), scalar(r)};
  return m;
}

// Constant-velocity motion of [px, py, vx, vy] with white acceleration.
void constantVelocity(RegisteredModel& m, double dt, double q) {
  m.layout.states = {{"px", "m"}, {"py", "m"}, {"vx", "m/s"}, {"vy", "m/s"}};
  Matrix F = Matrix::Identity(4, 4);
  F(0, 2) = F(1, 3) = dt;
  Matrix G = Matrix::Zero(4, 2);
  G(0, 0) = G(1, 1) = 0.5 * dt * dt;
  G(2, 0) = G(3, 1) = dt;
  const Matrix Q = q * Matrix::Identity(2, 2);
  m.transitionBinding = bindAll(m.layout, {0, 1, 2, 3});
  m.transitionA.dimActive = 4;
  m.transitionA.noise = NoiseModel::gaussianNoise(Q);
  m.transitionA.f = [F, G](const Vector& x, const Vector& w) -> Vector { return F * x + G * w; };
  m.transitionA.dfdx = [F](const Vector&, const Vector&) { return F; };
  m.transitionA.dfdw = [G](const Vector&, const Vector&) { return G; };
  m.transitionD = TransitionModelD{Vector::Zero(4), F, G, Q};
}

RegisteredModel cv2d(const ModelParams& p) {
  checkParams("cv2d", p, {"dt", "q", "r"});
  RegisteredModel m;
  m.key = "cv2d";
  const double dt = positive(p, "dt", 0.1), q = nonNegative(p, "q", 0.5), r = positive(p, "r", 0.25);
  constantVelocity(m, dt, q);
  m.initialMean = (Vector(4) << 0.0, 0.0, 1.0, 0.5).finished();
  m.initialStd = (Vector(4) << 1.0, 1.0, 0.5, 0.5).finished();
  m.outputBinding = bindAll(m.layout, {0, 1});
  const Matrix R = r * Matrix::Identity(2, 2);
  m.outputA.dimActive = 2;
  m.outputA.dimOutput = 2;
  m.outputA.noise = NoiseModel::gaussianNoise(R);
  m.outputA.h = [](const Vector& x, const Vector& v) -> Vector { return x + v; };
  m.outputA.dhdx = [](const Vector&, const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  m.outputD = OutputModelD{Vector::Zero(2), Matrix::Identity(2, 2), Matrix::Identity(2, 2), R};
  return m;
}

// [x, v] with x' = x + dt v, v' = v + w and y = k x^3 + e.
RegisteredModel cubicOutput(const ModelParams& p) {
  checkParams("cubic_output", p, {"dt", "q", "r", "k"});
  RegisteredModel m;
  m.key = "cubic_output";
  const double dt = positive(p, "dt", 0.1), q = nonNegative(p, "q", 0.01), r = positive(p, "r", 0.1);
  const double k = p.get("k", 0.5);
  m.layout.states = {{"x", "m"}, {"v", "m/s"}};
  m.initialMean = (Vector(2) << 1.0, 0.2).finished();
  m.initialStd = (Vector(2) << 0.3, 0.2).finished();
  m.transitionBinding = bindAll(m.layout, {0, 1});
  m.outputBinding = bindAll(m.layout, {0});

  const Matrix F = (Matrix(2, 2) << 1.0, dt, 0.0, 1.0).finished();
  const Matrix G = (Matrix(2, 1) << 0.0, 1.0).finished();
  m.transitionA.dimActive = 2;
  m.transitionA.noise = NoiseModel::gaussianNoise(scalar(q));
  m.transitionA.f = [F, G](const Vector& x, const Vector& w) -> Vector { return F * x + G * w; };
  m.transitionA.dfdx = [F](const Vector&, const Vector&) { return F; };
  m.transitionA.dfdw = [G](const Vector&, const Vector&) { return G; };
  m.transitionD = TransitionModelD{Vector::Zero(2), F, G, scalar(q)};

  m.outputA.dimActive = 1;
  m.outputA.dimOutput = 1;
  m.outputA.noise = NoiseModel::gaussianNoise(scalar(r));
  m.outputA.h = [k](const Vector& x, const Vector& v) -> Vector { return vec1(k * std::pow(x(0), 3) + v(0)); };
  m.outputA.dhdx = [k](const Vector& x, const Vector&) { return scalar(3.0 * k * x(0) * x(0)); };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.outputA.likelihood = [k, r](const Vector& y, const Vector& x) {
    const double e = y(0) - k * std::pow(x(0), 3);
    return std::exp(-0.5 * e * e / r);
  };
  OutputModelB b;
  b.dimActive = 1;
  b.dimOutput = 1;
  b.h = [k](const Vector& x) { return vec1(k * std::pow(x(0), 3)); };
  b.J = [](const Vector&) { return scalar(1.0); };
  b.noiseDensity = [r](const Vector& v) {
    return std::exp(-0.5 * v(0) * v(0) / r) / std::sqrt(2.0 * std::numbers::pi * r);
  };
  b.noiseCov = scalar(r);
  b.dhdx = [k](const Vector& x) { return scalar(3.0 * k * x(0) * x(0)); };
  m.outputB = b;
  return m;
}

// Constant velocity observed by range and bearing from the origin.
RegisteredModel rangeBearing(const ModelParams& p) {
  checkParams("range_bearing", p, {"dt", "q", "r_range", "r_bearing"});
  RegisteredModel m;
  m.key = "range_bearing";
  const double dt = positive(p, "dt", 0.1), q = nonNegative(p, "q", 0.1);
  const double rr = positive(p, "r_range", 0.01), rb = positive(p, "r_bearing", 1e-4);
  constantVelocity(m, dt, q);
  m.initialMean = (Vector(4) << 10.0, 5.0, 1.0, 0.5).finished();
  m.initialStd = (Vector(4) << 0.5, 0.5, 0.3, 0.3).finished();
  m.outputBinding = bindAll(m.layout, {0, 1});
  const Matrix R = (Vector(2) << rr, rb).finished().asDiagonal();
  auto h = [](const Vector& x) -> Vector {
    return (Vector(2) << std::hypot(x(0), x(1)), std::atan2(x(1), x(0))).finished();
  };
  auto dh = [](const Vector& x) -> Matrix {
    const double r2 = x(0) * x(0) + x(1) * x(1), r = std::sqrt(r2);
    return (Matrix(2, 2) << x(0) / r, x(1) / r, -x(1) / r2, x(0) / r2).finished();
  };
  m.outputA.dimActive = 2;
  m.outputA.dimOutput = 2;
  m.outputA.noise = NoiseModel::gaussianNoise(R);
  m.outputA.h = [h](const Vector& x, const Vector& v) -> Vector { return h(x) + v; };
  m.outputA.dhdx = [dh](const Vector& x, const Vector&) { return dh(x); };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  m.outputA.likelihood = [h, R](const Vector& y, const Vector& x) {
    const Vector e = y - h(x);
    return std::exp(-0.5 * (e.array().square() / R.diagonal().array()).sum());
  };
  OutputModelB b;
  b.dimActive = 2;
  b.dimOutput = 2;
  b.h = h;
  b.J = [](const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  b.noiseDensity = [R](const Vector& v) { return std::exp(gaussianLogPdf(v, Vector::Zero(2), R)); };
  b.noiseCov = R;
  b.dhdx = dh;
  m.outputB = b;
  return m;
}

// [theta, omega] with Euler-discretized pendulum dynamics; measures
// L sin(theta) and omega. theta enters nonlinearly, omega linearly.
RegisteredModel pendulum(const ModelParams& p) {
  checkParams("pendulum", p, {"dt", "g", "length", "q", "r_pos", "r_rate"});
  RegisteredModel m;
  m.key = "pendulum";
  const double dt = positive(p, "dt", 0.05), g = positive(p, "g", 9.81), L = positive(p, "length", 1.0);
  const double q = positive(p, "q", 0.01), rp = positive(p, "r_pos", 0.01), rw = positive(p, "r_rate", 0.01);
  m.layout.states = {{"theta", "rad"}, {"omega", "rad/s"}};
  m.initialMean = (Vector(2) << 0.5, 0.0).finished();
  m.initialStd = (Vector(2) << 0.2, 0.2).finished();
  m.transitionBinding = bindAll(m.layout, {0, 1});
  m.outputBinding = bindAll(m.layout, {0, 1});
  const RowPartition part{{0}, {1}};
  m.predictPartition = part;
  m.updatePartition = part;

  m.transitionA.dimActive = 2;
  m.transitionA.noise = NoiseModel::gaussianNoise(scalar(q));
  m.transitionA.f = [dt, g](const Vector& x, const Vector& w) -> Vector {
    return (Vector(2) << x(0) + dt * x(1), x(1) - dt * g * std::sin(x(0)) + w(0)).finished();
  };
  m.transitionA.dfdx = [dt, g](const Vector& x, const Vector&) {
    return Matrix((Matrix(2, 2) << 1.0, dt, -dt * g * std::cos(x(0)), 1.0).finished());
  };
  m.transitionA.dfdw = [](const Vector&, const Vector&) { return Matrix((Matrix(2, 1) << 0.0, 1.0).finished()); };

  TransitionModelC tc;
  tc.dimActive = 2;
  tc.partition = part;
  tc.noiseCov = scalar(q);
  tc.f = [dt, g](const Vector& th) -> Vector { return (Vector(2) << th(0), -dt * g * std::sin(th(0))).finished(); };
  tc.F = [dt](const Vector&) { return Matrix((Matrix(2, 1) << dt, 1.0).finished()); };
  tc.G = [](const Vector&) { return Matrix((Matrix(2, 1) << 0.0, 1.0).finished()); };
  m.transitionC = tc;

  const Matrix R = (Vector(2) << rp, rw).finished().asDiagonal();
  m.outputA.dimActive = 2;
  m.outputA.dimOutput = 2;
  m.outputA.noise = NoiseModel::gaussianNoise(R);
  m.outputA.h = [L](const Vector& x, const Vector& v) -> Vector {
    return (Vector(2) << L * std::sin(x(0)) + v(0), x(1) + v(1)).finished();
  };
  m.outputA.dhdx = [L](const Vector& x, const Vector&) {
    return Matrix((Matrix(2, 2) << L * std::cos(x(0)), 0.0, 0.0, 1.0).finished());
  };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  m.outputA.likelihood = [L, R](const Vector& y, const Vector& x) {
    const Vector e = (Vector(2) << y(0) - L * std::sin(x(0)), y(1) - x(1)).finished();
    return std::exp(-0.5 * (e.array().square() / R.diagonal().array()).sum());
  };

  OutputModelC oc;
  oc.dimActive = 2;
  oc.dimOutput = 2;
  oc.partition = part;
  oc.noiseCov = R;
  oc.h = [L](const Vector& th) -> Vector { return (Vector(2) << L * std::sin(th(0)), 0.0).finished(); };
  oc.H = [](const Vector&) { return Matrix((Matrix(2, 1) << 0.0, 1.0).finished()); };
  oc.J = [](const Vector&) { return Matrix(Matrix::Identity(2, 2)); };
  m.outputC = oc;
  return m;
}

// Linear scalar dynamics measured through Student-t noise of scale s:
// y = x + s t_nu. With nu <= 2 the noise has no variance.
RegisteredModel studentTScalar(const ModelParams& p) {
  checkParams("student_t_scalar", p, {"a", "q", "nu", "scale", "x0", "p0"});
  RegisteredModel m;
  m.key = "student_t_scalar";
  const double a = p.get("a", 0.95), q = nonNegative(p, "q", 0.1);
  const double nu = positive(p, "nu", 2.0), s = positive(p, "scale", 0.5);
  linearScalarParts(m, a, q);
  m.initialMean = vec1(p.get("x0", 0.0));
  m.initialStd = vec1(std::sqrt(positive(p, "p0", 1.0)));

  const boost::math::students_t_distribution<double> t(nu);
  auto density = [t, s](const Vector& v) { return boost::math::pdf(t, v(0) / s) / s; };
  auto sampler = [t, s](std::uint64_t seed, std::uint64_t index) {
    return vec1(s * boost::math::quantile(t, rng::uniform(seed, index)));
  };
  std::optional<Matrix> cov;
  if (nu > 2.0) cov = scalar(s * s * nu / (nu - 2.0));

  m.outputA.dimActive = 1;
  m.outputA.dimOutput = 1;
  m.outputA.noise = NoiseModel::custom(1, sampler, density, cov);
  m.outputA.h = [](const Vector& x, const Vector& v) -> Vector { return x + v; };
  m.outputA.dhdx = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.outputA.dhdv = [](const Vector&, const Vector&) { return scalar(1.0); };
  m.outputA.likelihood = [density](const Vector& y, const Vector& x) { return density(y - x); };

  OutputModelB b;
  b.dimActive = 1;
  b.dimOutput = 1;
  b.h = [](const Vector& x) { return x; };
  b.J = [](const Vector&) { return scalar(1.0); };
  b.noiseDensity = density;
  b.noiseCov = cov;
  b.dhdx = [](const Vector&) { return scalar(1.0); };
  m.outputB = b;
  return m;
}

const std::map<std::string, std::function<RegisteredModel(const ModelParams&)>>& builders() {
  static const std::map<std::string, std::function<RegisteredModel(const ModelParams&)>> table{
      {"linear_scalar", linearScalar}, {"cv2d", cv2d},         {"cubic_output", cubicOutput},
      {"range_bearing", rangeBearing}, {"pendulum", pendulum}, {"student_t_scalar", studentTScalar},
  };
  return table;
}

}  // namespace

std::vector<std::string> registeredModelKeys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : builders()) keys.push_back(k);
  return keys;
}

RegisteredModel makeModel(const std::string& key, const ModelParams& params) {
  const auto it = builders().find(key);
  if (it == builders().end()) throw Error(ErrorCode::ConfigError, "unknown model '" + key + "'");
  return it->second(params);
}

}  // namespace mbf::harness
