#pragma once

#include <optional>

#include "mbf/models.hpp"
#include "mbf/quadrature.hpp"

namespace mbf {

/// Gaussian-kernel settings for estimating an implicit likelihood
/// p(y | T_A x) = integral of delta(y - h(T_A x, v)) p(v) dv.
struct KernelConfig {
  enum class Bandwidth { Silverman, Fixed };
  Bandwidth bandwidth = Bandwidth::Silverman;
  std::optional<Matrix> fixedZ;  ///< SPD bandwidth matrix for Bandwidth::Fixed

  static KernelConfig silverman() { return {}; }
  static KernelConfig fixed(Matrix z) { return {Bandwidth::Fixed, std::move(z)}; }
};

/// Per-dimension Silverman bandwidth (standard deviations, not variances) for
/// weighted samples of the output:
///   sigma_j * (4 / ((m + 2) * N_eff))^(1 / (m + 4)),  N_eff = (sum v)^2 / sum v^2.
Vector silvermanBandwidth(const std::vector<Vector>& outputs, const std::vector<double>& weights);

struct KdeDiagnostics {
  bool bandwidthFloored = false;
};

/// (sum_j v_j)^-1 sum_j K_Z(y - h(node, v_j)) v_j with a Gaussian kernel.
/// The result is an unnormalized likelihood value. A Silverman bandwidth
/// that collapses in some dimension is floored at 1e-9 * (1 + |y_j|).
/// Throws ZeroTotalWeight for all-zero noise weights and ZeroBandwidth for a
/// fixed bandwidth that is not positive definite.
double kdeLikelihoodAt(const Vector& node, const Vector& y, const OutputModelA& model,
                       const KernelConfig& config, const WeightedSampleSet& noiseSamples,
                       KdeDiagnostics* diag = nullptr);

}  // namespace mbf
