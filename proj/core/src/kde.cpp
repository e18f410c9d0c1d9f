#include "mbf/kde.hpp"

#include <cmath>
#include <numbers>

namespace mbf {

Vector silvermanBandwidth(const std::vector<Vector>& outputs, const std::vector<double>& weights) {
  const Eigen::Index m = outputs.empty() ? 0 : outputs.front().size();
  double sum = 0.0, sumSq = 0.0;
  Vector mean = Vector::Zero(m);
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    sum += weights[j];
    sumSq += weights[j] * weights[j];
    mean += weights[j] * outputs[j];
  }
  mean /= sum;
  Vector var = Vector::Zero(m);
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    var += weights[j] * (outputs[j] - mean).cwiseAbs2();
  }
  var /= sum;
  const double nEff = sum * sum / sumSq;
  const double md = static_cast<double>(m);
  const double factor = std::pow(4.0 / ((md + 2.0) * nEff), 1.0 / (md + 4.0));
  return var.cwiseSqrt() * factor;
}

double kdeLikelihoodAt(const Vector& node, const Vector& y, const OutputModelA& model,
                       const KernelConfig& config, const WeightedSampleSet& noiseSamples,
                       KdeDiagnostics* diag) {
  noiseSamples.validate();
  const Eigen::Index m = y.size();
  std::vector<Vector> outputs;
  outputs.reserve(noiseSamples.size());
  for (const auto& v : noiseSamples.points) {
    outputs.push_back(model.h(node, v));
    if (outputs.back().size() != m) {
      throw Error(ErrorCode::DimensionMismatch, "output model returned the wrong dimension");
    }
  }

  double acc = 0.0;
  if (config.bandwidth == KernelConfig::Bandwidth::Silverman) {
    Vector h = silvermanBandwidth(outputs, noiseSamples.weights);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double floor = 1e-9 * (1.0 + std::abs(y(j)));
      if (!(h(j) >= floor)) {
        h(j) = floor;
        if (diag != nullptr) diag->bandwidthFloored = true;
      }
    }
    const Vector invH = h.cwiseInverse();
    const double logNorm =
        -0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi) - h.array().log().sum();
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      const double maha = (y - outputs[j]).cwiseProduct(invH).squaredNorm();
      acc += noiseSamples.weights[j] * std::exp(logNorm - 0.5 * maha);
    }
  } else {
    if (!config.fixedZ || config.fixedZ->rows() != m || config.fixedZ->cols() != m) {
      throw Error(ErrorCode::ZeroBandwidth, "fixed bandwidth matrix missing or mis-sized");
    }
    const SpdFactor zf(*config.fixedZ, ErrorCode::ZeroBandwidth, "fixed kernel bandwidth");
    const Matrix l = zf.lower();
    const double logNorm =
        -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + zf.logDeterminant());
    for (std::size_t j = 0; j < outputs.size(); ++j) {
      const Vector r = l.triangularView<Eigen::Lower>().solve(y - outputs[j]);
      acc += noiseSamples.weights[j] * std::exp(logNorm - 0.5 * r.squaredNorm());
    }
  }
  return acc / noiseSamples.totalWeight();
}

}  // namespace mbf
