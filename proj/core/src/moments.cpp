#include "mbf/moments.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mbf/rng.hpp"

namespace mbf {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

void requireShape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void requireFinite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not finite");
}

struct JointNodes {
  WeightedSampleSet samples;
  bool mcFallback = false;
};

// Nodes over (x, noise) with x ~ prior and the noise independent of it.
JointNodes jointNodes(const GaussianBelief& prior, const NoiseModel& noise, const IntegrationRule& rule) {
  const Eigen::Index a = prior.dim();
  const Eigen::Index q = noise.dim;
  if (noise.gaussian) {
    Vector mean = Vector::Zero(a + q);
    mean.head(a) = prior.mean();
    Matrix cov = Matrix::Zero(a + q, a + q);
    cov.topLeftCorner(a, a) = prior.cov();
    if (q > 0) cov.bottomRightCorner(q, q) = noise.covariance();
    auto gen = nodesWithFallback(rule, mean, cov);
    return {std::move(gen.samples), gen.mcFallback};
  }
  const auto* mc = std::get_if<MonteCarlo>(&rule.kind);
  if (mc == nullptr) {
    throw Error(ErrorCode::RuleUnsupportedForNoise,
                "non-Gaussian noise can only be integrated with a sample-based rule");
  }
  WeightedSampleSet xs = monteCarloNodes(mc->count, mc->seed, prior.mean(), prior.cov());
  const std::uint64_t noiseSeed = rng::deriveSeed(mc->seed, 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Vector w = noise.sample(noiseSeed, i);
    require(w.size() == q, "noise sampler returned the wrong dimension");
    Vector joint(a + q);
    joint << xs.points[i], w;
    xs.points[i] = std::move(joint);
  }
  return {std::move(xs), false};
}

// Self-normalized posterior moments of the nodes under likelihood values.
UpdateMoments posteriorFromLikelihoods(const WeightedSampleSet& nodes, const std::vector<double>& lik) {
  std::vector<double> v(nodes.size());
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!std::isfinite(lik[i]) || lik[i] < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "likelihood must be finite and nonnegative");
    }
    v[i] = nodes.weights[i] * lik[i];
    total += v[i];
  }
  if (!(total > kMinTotalWeight)) {
    throw Error(ErrorCode::DegenerateUpdate, "measurement has negligible likelihood at every node");
  }
  const Eigen::Index d = nodes.dim();
  Vector mean = Vector::Zero(d);
  for (std::size_t i = 0; i < nodes.size(); ++i) mean += v[i] * nodes.points[i];
  mean /= total;
  Matrix cov = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Vector c = nodes.points[i] - mean;
    cov.noalias() += v[i] * c * c.transpose();
  }
  cov /= total;
  UpdateMoments out{std::move(mean), symmetrized(cov), {}};
  out.diagnostics.nodeCount = nodes.size();
  return out;
}

// Scatter a vector/matrix given in `order` back to natural row order.
Vector unpermute(const Vector& v, const std::vector<int>& order) {
  Vector out(v.size());
  for (std::size_t k = 0; k < order.size(); ++k) out(order[k]) = v(static_cast<Eigen::Index>(k));
  return out;
}

Matrix unpermute(const Matrix& m, const std::vector<int>& order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = 0; b < order.size(); ++b) {
      out(order[a], order[b]) = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return out;
}

double totalWeightOrThrow(const WeightedSampleSet& s) {
  const double total = s.totalWeight();
  if (!(total > kMinTotalWeight)) throw Error(ErrorCode::ZeroTotalWeight, "sample weights sum to zero");
  return total;
}

}  // namespace

void MomentDiagnostics::merge(const MomentDiagnostics& other) {
  nodeCount += other.nodeCount;
  jitterApplied = jitterApplied || other.jitterApplied;
  mcFallback = mcFallback || other.mcFallback;
  bandwidthFloored = bandwidthFloored || other.bandwidthFloored;
}

// --- Level c scratch ----------------------------------------------------------

void CLevelPredictionScratch::center(const Vector& node, const Vector& meanN, const Vector& meanL,
                                     const Vector& priorN, const Vector& priorL) {
  gamma = pi - meanN;
  alpha = eps - meanL;
  beta = phi - priorL;
  delta = node - priorN;
}

CLevelPredictionScratch cLevelPredictionScratch(const TransitionModelC& model,
                                                const ConditionalGaussian& linGivenNonlinear,
                                                const Vector& node) {
  const auto& part = model.partition;
  const Eigen::Index a = model.dimActive;
  const auto nl = static_cast<Eigen::Index>(part.linear.size());
  const Eigen::Index q = model.noiseCov.rows();

  const Vector f = model.f(node);
  const Matrix F = model.F(node);
  const Matrix G = model.G(node);
  require(f.size() == a, "level-c f has the wrong length");
  requireShape(F, a, nl, "level-c F");
  requireShape(G, a, q, "level-c G");
  requireFinite(f, "level-c f");
  requireFinite(F, "level-c F");
  requireFinite(G, "level-c G");

  const Vector fn = selectRows(f, part.nonlinear), fl = selectRows(f, part.linear);
  const Matrix Fn = selectRows(F, part.nonlinear), Fl = selectRows(F, part.linear);
  const Matrix Gn = selectRows(G, part.nonlinear), Gl = selectRows(G, part.linear);
  const Matrix& Pw = model.noiseCov;

  CLevelPredictionScratch s;
  s.phi = linGivenNonlinear.meanAt(node);
  s.Phi = linGivenNonlinear.cov;
  s.pi = fn + Fn * s.phi;
  s.eps = fl + Fl * s.phi;
  s.XiN = symmetrized(Fn * s.Phi * Fn.transpose() + Gn * Pw * Gn.transpose());
  s.XiLN = Fl * s.Phi * Fn.transpose() + Gl * Pw * Gn.transpose();
  s.XiL = symmetrized(Fl * s.Phi * Fl.transpose() + Gl * Pw * Gl.transpose());

  const SpdFactor fac(s.XiN, ErrorCode::SingularXiN, "nonlinear-block predicted covariance");
  s.jittered = fac.jittered();
  s.Xi = fac.solve(Matrix(s.XiLN.transpose())).transpose();
  s.Gamma = fac.solve(Matrix(Fn * s.Phi)).transpose();
  s.Palpha = symmetrized(s.XiL - s.Xi * s.XiLN.transpose());
  s.PalphaBeta = Fl * s.Phi - s.Xi * Fn * s.Phi;
  return s;
}

void CLevelUpdateScratch::center(const Vector& node, const Vector& meanN, const Vector& meanL) {
  varkappa = node - meanN;
  kappa = omega - meanL;
}

CLevelUpdateScratch cLevelUpdateScratch(const OutputModelC& model,
                                        const ConditionalGaussian& linGivenNonlinear,
                                        const Vector& node, const Vector& y) {
  const Eigen::Index m = model.dimOutput;
  const auto nl = static_cast<Eigen::Index>(model.partition.linear.size());
  const Eigen::Index q = model.noiseCov.rows();
  require(y.size() == m, "measurement has the wrong length");

  const Vector h = model.h(node);
  const Matrix H = model.H(node);
  const Matrix J = model.J(node);
  require(h.size() == m, "level-c h has the wrong length");
  requireShape(H, m, nl, "level-c H");
  requireShape(J, m, q, "level-c J");
  requireFinite(h, "level-c h");
  requireFinite(H, "level-c H");
  requireFinite(J, "level-c J");

  CLevelUpdateScratch s;
  s.psi = linGivenNonlinear.meanAt(node);
  s.Psi = linGivenNonlinear.cov;
  s.varsigma = h + H * s.psi;
  s.Sigma = symmetrized(H * s.Psi * H.transpose() + J * model.noiseCov * J.transpose());
  const SpdFactor fac(s.Sigma, ErrorCode::SingularSigma, "conditional output covariance");
  s.jittered = fac.jittered();
  s.gain = fac.solve(Matrix(H * s.Psi)).transpose();
  const Vector innov = y - s.varsigma;
  s.omega = s.psi + s.gain * innov;
  s.Omega = symmetrized(s.Psi - s.gain * H * s.Psi);
  const double maha = innov.dot(fac.solve(innov));
  s.likelihood = std::exp(-0.5 * maha - 0.5 * fac.logDeterminant() -
                          0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi));
  return s;
}

// --- Prediction ---------------------------------------------------------------

PredictionMoments predictA(const TransitionModelA& model, const GaussianBelief& priorActive,
                           const IntegrationRule& rule) {
  const Eigen::Index a = model.dimActive;
  require(priorActive.dim() == a, "prior does not match the model's active dimension");
  if (!model.f) throw Error(ErrorCode::InvalidArgument, "transition model has no f");
  auto nodes = jointNodes(priorActive, model.noise, rule);
  const auto& s = nodes.samples;
  const double total = totalWeightOrThrow(s);

  std::vector<Vector> fx(s.size());
  Vector mean = Vector::Zero(a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector& r = s.points[i];
    fx[i] = model.f(r.head(a), r.tail(model.noise.dim));
    require(fx[i].size() == a, "level-a f has the wrong length");
    requireFinite(fx[i], "level-a f");
    mean += s.weights[i] * fx[i];
  }
  mean /= total;

  Matrix cov = Matrix::Zero(a, a), cross = Matrix::Zero(a, a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector c = fx[i] - mean;
    const Vector dx = s.points[i].head(a) - priorActive.mean();
    cov.noalias() += s.weights[i] * c * c.transpose();
    cross.noalias() += s.weights[i] * c * dx.transpose();
  }
  PredictionMoments out{std::move(mean), symmetrized(cov / total), cross / total, {}};
  out.diagnostics.nodeCount = s.size();
  out.diagnostics.mcFallback = nodes.mcFallback;
  return out;
}

PredictionMoments predictB(const TransitionModelB& model, const GaussianBelief& priorActive,
                           const IntegrationRule& rule) {
  const Eigen::Index a = model.dimActive;
  const Eigen::Index q = model.noiseCov.rows();
  require(priorActive.dim() == a, "prior does not match the model's active dimension");
  if (!model.f || !model.G) throw Error(ErrorCode::InvalidArgument, "level-b transition needs f and G");
  auto gen = nodesWithFallback(rule, priorActive.mean(), priorActive.cov());
  const auto& s = gen.samples;
  const double total = totalWeightOrThrow(s);

  std::vector<Vector> fx(s.size());
  Vector mean = Vector::Zero(a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    fx[i] = model.f(s.points[i]);
    require(fx[i].size() == a, "level-b f has the wrong length");
    requireFinite(fx[i], "level-b f");
    mean += s.weights[i] * fx[i];
  }
  mean /= total;

  Matrix cov = Matrix::Zero(a, a), cross = Matrix::Zero(a, a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Matrix G = model.G(s.points[i]);
    requireShape(G, a, q, "level-b G");
    requireFinite(G, "level-b G");
    const Vector c = fx[i] - mean;
    const Vector dx = s.points[i] - priorActive.mean();
    cov.noalias() += s.weights[i] * (G * model.noiseCov * G.transpose() + c * c.transpose());
    cross.noalias() += s.weights[i] * c * dx.transpose();
  }
  PredictionMoments out{std::move(mean), symmetrized(cov / total), cross / total, {}};
  out.diagnostics.nodeCount = s.size();
  out.diagnostics.mcFallback = gen.mcFallback;
  return out;
}

PredictionMoments predictC(const TransitionModelC& model, const GaussianBelief& priorFull,
                           const SubspaceSplit& split, const IntegrationRule& rule) {
  const Eigen::Index a = model.dimActive;
  require(split.activeDim() == a, "split does not match the model's active dimension");
  require(priorFull.dim() == split.stateDim(), "prior does not match the split");
  model.partition.validate(a);
  const auto& part = model.partition;
  const auto nn = static_cast<Eigen::Index>(part.nonlinear.size());
  const auto nl = static_cast<Eigen::Index>(part.linear.size());

  const Matrix An = selectRows(split.active(), part.nonlinear);
  const Matrix Al = selectRows(split.active(), part.linear);
  bool jit = false;
  const ConditionalGaussian cond = conditionOnSub(priorFull, An, Al, &jit);
  const Vector priorN = An * priorFull.mean();
  const Vector priorL = Al * priorFull.mean();
  const Matrix covN = symmetrized(An * priorFull.cov() * An.transpose());

  auto gen = nodesWithFallback(rule, priorN, covN);
  const auto& s = gen.samples;
  const double total = totalWeightOrThrow(s);

  Vector meanN = Vector::Zero(nn), meanL = Vector::Zero(nl);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto sc = cLevelPredictionScratch(model, cond, s.points[i]);
    jit = jit || sc.jittered;
    meanN += s.weights[i] * sc.pi;
    meanL += s.weights[i] * sc.eps;
  }
  meanN /= total;
  meanL /= total;

  Matrix cov = Matrix::Zero(a, a), cross = Matrix::Zero(a, a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto sc = cLevelPredictionScratch(model, cond, s.points[i]);
    sc.center(s.points[i], meanN, meanL, priorN, priorL);
    const double w = s.weights[i];
    const Matrix& Pi = sc.Pi();
    const Matrix PiXiT = Pi * sc.Xi.transpose();
    const Matrix PiGammaT = Pi * sc.Gamma.transpose();

    cov.topLeftCorner(nn, nn).noalias() += w * (Pi + sc.gamma * sc.gamma.transpose());
    cov.topRightCorner(nn, nl).noalias() += w * (sc.gamma * sc.alpha.transpose() + PiXiT);
    cov.bottomRightCorner(nl, nl).noalias() +=
        w * (sc.Palpha + sc.alpha * sc.alpha.transpose() + sc.Xi * PiXiT);

    cross.topLeftCorner(nn, nn).noalias() += w * sc.gamma * sc.delta.transpose();
    cross.topRightCorner(nn, nl).noalias() += w * (sc.gamma * sc.beta.transpose() + PiGammaT);
    cross.bottomLeftCorner(nl, nn).noalias() += w * sc.alpha * sc.delta.transpose();
    cross.bottomRightCorner(nl, nl).noalias() +=
        w * (sc.PalphaBeta + sc.alpha * sc.beta.transpose() + sc.Xi * PiGammaT);
  }
  cov.bottomLeftCorner(nl, nn) = cov.topRightCorner(nn, nl).transpose();
  cov /= total;
  cross /= total;

  Vector mean(a);
  mean << meanN, meanL;
  const auto order = part.order();
  PredictionMoments out{unpermute(mean, order), symmetrized(unpermute(cov, order)),
                        unpermute(cross, order), {}};
  out.diagnostics.nodeCount = s.size();
  out.diagnostics.mcFallback = gen.mcFallback;
  out.diagnostics.jitterApplied = jit;
  return out;
}

PredictionMoments predictD(const TransitionModelD& model, const GaussianBelief& priorActive) {
  const Eigen::Index a = model.dimActive();
  require(priorActive.dim() == a, "prior does not match the model's active dimension");
  requireShape(model.F, a, a, "level-d F");
  requireShape(model.G, a, model.noiseCov.rows(), "level-d G");
  requireShape(model.noiseCov, model.G.cols(), model.G.cols(), "level-d noise covariance");
  PredictionMoments out;
  out.activeMean = model.f + model.F * priorActive.mean();
  out.crossCov = model.F * priorActive.cov();
  out.activeCov = symmetrized(out.crossCov * model.F.transpose() +
                              model.G * model.noiseCov * model.G.transpose());
  return out;
}

// --- Update -------------------------------------------------------------------

UpdateMoments updateLikelihood(const LikelihoodFn& likelihood, const GaussianBelief& priorActive,
                               const Vector& y, const IntegrationRule& rule) {
  if (!likelihood) throw Error(ErrorCode::InvalidArgument, "no likelihood supplied");
  auto gen = nodesWithFallback(rule, priorActive.mean(), priorActive.cov());
  std::vector<double> lik(gen.samples.size());
  for (std::size_t i = 0; i < lik.size(); ++i) lik[i] = likelihood(y, gen.samples.points[i]);
  auto out = posteriorFromLikelihoods(gen.samples, lik);
  out.diagnostics.mcFallback = gen.mcFallback;
  return out;
}

UpdateMoments updateA_KDE(const OutputModelA& model, const GaussianBelief& priorActive,
                          const Vector& y, const IntegrationRule& rule, const KernelConfig& kernel,
                          const IntegrationRule& noiseRule) {
  require(priorActive.dim() == model.dimActive, "prior does not match the model's active dimension");
  require(y.size() == model.dimOutput, "measurement has the wrong length");
  if (!model.h) throw Error(ErrorCode::InvalidArgument, "output model has no h");

  WeightedSampleSet noise;
  if (const auto* mc = std::get_if<MonteCarlo>(&noiseRule.kind)) {
    noise.points.reserve(mc->count);
    for (std::size_t j = 0; j < mc->count; ++j) noise.points.push_back(model.noise.sample(mc->seed, j));
    noise.weights.assign(mc->count, 1.0);
  } else if (model.noise.gaussian) {
    noise = nodesFor(noiseRule, Vector::Zero(model.noise.dim), model.noise.covariance());
  } else {
    throw Error(ErrorCode::RuleUnsupportedForNoise,
                "non-Gaussian output noise needs a Monte Carlo noise rule");
  }

  auto gen = nodesWithFallback(rule, priorActive.mean(), priorActive.cov());
  std::vector<double> lik(gen.samples.size());
  bool floored = false;
  for (std::size_t i = 0; i < lik.size(); ++i) {
    KdeDiagnostics kd;
    lik[i] = kdeLikelihoodAt(gen.samples.points[i], y, model, kernel, noise, &kd);
    floored = floored || kd.bandwidthFloored;
  }
  auto out = posteriorFromLikelihoods(gen.samples, lik);
  out.diagnostics.mcFallback = gen.mcFallback;
  out.diagnostics.bandwidthFloored = floored;
  return out;
}

UpdateMoments updateB(const OutputModelB& model, const GaussianBelief& priorActive,
                      const Vector& y, const IntegrationRule& rule) {
  const Eigen::Index m = model.dimOutput;
  require(priorActive.dim() == model.dimActive, "prior does not match the model's active dimension");
  require(y.size() == m, "measurement has the wrong length");
  if (!model.h || !model.J || !model.noiseDensity) {
    throw Error(ErrorCode::InvalidArgument, "level-b output needs h, J and a noise density");
  }
  auto gen = nodesWithFallback(rule, priorActive.mean(), priorActive.cov());
  std::vector<double> lik(gen.samples.size());
  for (std::size_t i = 0; i < lik.size(); ++i) {
    const Vector& x = gen.samples.points[i];
    const Vector h = model.h(x);
    const Matrix J = model.J(x);
    require(h.size() == m, "level-b h has the wrong length");
    requireShape(J, m, m, "level-b J");
    const Eigen::FullPivLU<Matrix> lu(J);
    if (!J.allFinite() || !lu.isInvertible()) {
      throw Error(ErrorCode::NonInvertibleJb, "noise Jacobian is singular at an integration node");
    }
    lik[i] = model.noiseDensity(lu.solve(Vector(y - h))) / std::abs(lu.determinant());
  }
  auto out = posteriorFromLikelihoods(gen.samples, lik);
  out.diagnostics.mcFallback = gen.mcFallback;
  return out;
}

UpdateMoments updateC(const OutputModelC& model, const GaussianBelief& predictedFull,
                      const SubspaceSplit& split, const Vector& y, const IntegrationRule& rule) {
  const Eigen::Index b = model.dimActive;
  require(split.activeDim() == b, "split does not match the model's active dimension");
  require(predictedFull.dim() == split.stateDim(), "belief does not match the split");
  model.partition.validate(b);
  const auto& part = model.partition;
  const auto nn = static_cast<Eigen::Index>(part.nonlinear.size());
  const auto nl = static_cast<Eigen::Index>(part.linear.size());

  const Matrix An = selectRows(split.active(), part.nonlinear);
  const Matrix Al = selectRows(split.active(), part.linear);
  bool jit = false;
  const ConditionalGaussian cond = conditionOnSub(predictedFull, An, Al, &jit);
  const Vector priorN = An * predictedFull.mean();
  const Matrix covN = symmetrized(An * predictedFull.cov() * An.transpose());

  auto gen = nodesWithFallback(rule, priorN, covN);
  const auto& s = gen.samples;

  std::vector<double> v(s.size());
  double total = 0.0;
  Vector meanN = Vector::Zero(nn), meanL = Vector::Zero(nl);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto sc = cLevelUpdateScratch(model, cond, s.points[i], y);
    jit = jit || sc.jittered;
    v[i] = s.weights[i] * sc.likelihood;
    total += v[i];
    meanN += v[i] * s.points[i];
    meanL += v[i] * sc.omega;
  }
  if (!(total > kMinTotalWeight)) {
    throw Error(ErrorCode::DegenerateUpdate, "measurement has negligible likelihood at every node");
  }
  meanN /= total;
  meanL /= total;

  Matrix cov = Matrix::Zero(b, b);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (v[i] == 0.0) continue;
    auto sc = cLevelUpdateScratch(model, cond, s.points[i], y);
    sc.center(s.points[i], meanN, meanL);
    cov.topLeftCorner(nn, nn).noalias() += v[i] * sc.varkappa * sc.varkappa.transpose();
    cov.topRightCorner(nn, nl).noalias() += v[i] * sc.varkappa * sc.kappa.transpose();
    cov.bottomRightCorner(nl, nl).noalias() += v[i] * (sc.Omega + sc.kappa * sc.kappa.transpose());
  }
  cov.bottomLeftCorner(nl, nn) = cov.topRightCorner(nn, nl).transpose();
  cov /= total;

  Vector mean(b);
  mean << meanN, meanL;
  const auto order = part.order();
  UpdateMoments out{unpermute(mean, order), symmetrized(unpermute(cov, order)), {}};
  out.diagnostics.nodeCount = s.size();
  out.diagnostics.mcFallback = gen.mcFallback;
  out.diagnostics.jitterApplied = jit;
  return out;
}

UpdateMoments updateD(const OutputModelD& model, const GaussianBelief& priorActive,
                      const Vector& y) {
  const Eigen::Index m = model.h.size();
  const Eigen::Index b = model.dimActive();
  require(priorActive.dim() == b, "prior does not match the model's active dimension");
  require(y.size() == m, "measurement has the wrong length");
  requireShape(model.H, m, b, "level-d H");
  requireShape(model.J, m, model.noiseCov.rows(), "level-d J");
  requireShape(model.noiseCov, model.J.cols(), model.J.cols(), "level-d noise covariance");

  const Matrix& P = priorActive.cov();
  const Matrix PHt = P * model.H.transpose();
  const Matrix S = symmetrized(model.H * PHt + model.J * model.noiseCov * model.J.transpose());
  const SpdFactor fac(S, ErrorCode::SingularInnovationCov, "innovation covariance");
  const Matrix K = fac.solve(Matrix(PHt.transpose())).transpose();
  const Vector innov = y - model.h - model.H * priorActive.mean();

  UpdateMoments out;
  out.activeMean = priorActive.mean() + K * innov;
  out.activeCov = symmetrized((Matrix::Identity(b, b) - K * model.H) * P);
  out.diagnostics.jitterApplied = fac.jittered();
  return out;
}

UpdateMoments updateParametric(const OutputModelA& model, const GaussianBelief& priorActive,
                               const Vector& y, const IntegrationRule& rule) {
  const Eigen::Index b = model.dimActive;
  const Eigen::Index m = model.dimOutput;
  require(priorActive.dim() == b, "prior does not match the model's active dimension");
  require(y.size() == m, "measurement has the wrong length");
  if (!model.h) throw Error(ErrorCode::InvalidArgument, "output model has no h");
  if (!model.noise.gaussian && !model.noise.cov) {
    throw Error(ErrorCode::InvalidArgument, "parametric update needs noise with finite moments");
  }
  auto nodes = jointNodes(priorActive, model.noise, rule);
  const auto& s = nodes.samples;
  const double total = totalWeightOrThrow(s);

  std::vector<Vector> hx(s.size());
  Vector yMean = Vector::Zero(m);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector& r = s.points[i];
    hx[i] = model.h(r.head(b), r.tail(model.noise.dim));
    require(hx[i].size() == m, "level-a h has the wrong length");
    requireFinite(hx[i], "level-a h");
    yMean += s.weights[i] * hx[i];
  }
  yMean /= total;

  Matrix Py = Matrix::Zero(m, m), Pxy = Matrix::Zero(b, m);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vector c = hx[i] - yMean;
    const Vector dx = s.points[i].head(b) - priorActive.mean();
    Py.noalias() += s.weights[i] * c * c.transpose();
    Pxy.noalias() += s.weights[i] * dx * c.transpose();
  }
  Py = symmetrized(Py / total);
  Pxy /= total;

  const SpdFactor fac(Py, ErrorCode::SingularInnovationCov, "predicted output covariance");
  const Matrix K = fac.solve(Matrix(Pxy.transpose())).transpose();
  UpdateMoments out;
  out.activeMean = priorActive.mean() + K * (y - yMean);
  out.activeCov = symmetrized(priorActive.cov() - K * Pxy.transpose());
  out.diagnostics.nodeCount = s.size();
  out.diagnostics.mcFallback = nodes.mcFallback;
  out.diagnostics.jitterApplied = fac.jittered();
  return out;
}

}  // namespace mbf
