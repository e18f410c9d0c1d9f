#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "mbf/gaussian.hpp"

// Transition and output models at the four assumption levels:
//   a  general:            S_A x' = f(S_A x, w),            y = h(T_A x, v)
//   b  additive noise:     f(S_A x) + G(S_A x) w,            h(T_A x) + J(T_A x) v
//   c  conditionally linear-Gaussian sub-blocks (see TransitionModelC)
//   d  linear-Gaussian:    f + F S_A x + G w,                h + H T_A x + J v
// Every callable must be a deterministic, re-entrant function of its inputs.
namespace mbf {

using VecFn = std::function<Vector(const Vector&)>;
using MatFn = std::function<Matrix(const Vector&)>;
using VecFn2 = std::function<Vector(const Vector&, const Vector&)>;
using MatFn2 = std::function<Matrix(const Vector&, const Vector&)>;

/// Zero-mean noise source. All randomness is drawn through `sampler`, keyed
/// by an explicit (seed, index) pair.
struct NoiseModel {
  Eigen::Index dim = 0;
  bool gaussian = false;                            ///< N(0, cov) exactly
  std::optional<Matrix> cov;                        ///< when second moments exist
  std::function<Vector(std::uint64_t, std::uint64_t)> sampler;
  std::function<double(const Vector&)> density;     ///< pdf, may be absent

  static NoiseModel none();
  static NoiseModel gaussianNoise(const Matrix& cov);
  static NoiseModel custom(Eigen::Index dim, std::function<Vector(std::uint64_t, std::uint64_t)> sampler,
                           std::function<double(const Vector&)> density = {},
                           std::optional<Matrix> cov = std::nullopt);

  Vector sample(std::uint64_t seed, std::uint64_t index) const;
  const Matrix& covariance() const;  ///< throws InvalidArgument without moments
};

struct TransitionModelA {
  Eigen::Index dimActive = 0;
  NoiseModel noise;
  VecFn2 f;       ///< (S_A x_{k-1}, w) -> S_A x_k
  MatFn2 dfdx;    ///< optional analytic Jacobians
  MatFn2 dfdw;
};

struct OutputModelA {
  Eigen::Index dimActive = 0;
  Eigen::Index dimOutput = 0;
  NoiseModel noise;
  VecFn2 h;  ///< (T_A x, v) -> y
  /// Optional p(y | T_A x), known up to scale: (y, T_A x) -> value >= 0.
  std::function<double(const Vector&, const Vector&)> likelihood;
  MatFn2 dhdx;
  MatFn2 dhdv;
};

struct TransitionModelB {
  Eigen::Index dimActive = 0;
  Matrix noiseCov;  ///< P_w
  VecFn f;
  MatFn G;          ///< dimActive x dim(w)
  MatFn dfdx;       ///< optional, used when lowering further
};

struct OutputModelB {
  Eigen::Index dimActive = 0;
  Eigen::Index dimOutput = 0;
  VecFn h;
  MatFn J;  ///< dimOutput x dimOutput, invertible
  /// p_v; moments of v may be undefined (heavy tails).
  std::function<double(const Vector&)> noiseDensity;
  std::optional<Matrix> noiseCov;
  MatFn dhdx;
};

/// Row indices into the active block, split into nonlinear and linear rows.
struct RowPartition {
  std::vector<int> nonlinear;
  std::vector<int> linear;

  /// Throws BadPartition unless the two lists cover 0..rows-1 exactly once
  /// and the nonlinear list is non-empty.
  void validate(Eigen::Index rows) const;
  /// nonlinear rows followed by linear rows.
  std::vector<int> order() const;
};

/// S_A x' = f(S_A^n x) + F(S_A^n x) S_A^l x + G(S_A^n x) w, w ~ N(0, P_w).
/// Callables take S_A^n x in partition.nonlinear order, return rows in the
/// active block's own order, and F multiplies S_A^l x in partition.linear order.
struct TransitionModelC {
  Eigen::Index dimActive = 0;
  RowPartition partition;
  Matrix noiseCov;
  VecFn f;  ///< -> dimActive
  MatFn F;  ///< -> dimActive x |linear|
  MatFn G;  ///< -> dimActive x dim(w)
};

/// y = h(T_A^n x) + H(T_A^n x) T_A^l x + J(T_A^n x) v, v ~ N(0, P_v).
struct OutputModelC {
  Eigen::Index dimActive = 0;
  Eigen::Index dimOutput = 0;
  RowPartition partition;
  Matrix noiseCov;
  VecFn h;  ///< -> dimOutput
  MatFn H;  ///< -> dimOutput x |linear|
  MatFn J;  ///< -> dimOutput x dim(v)
};

struct TransitionModelD {
  Vector f;
  Matrix F;
  Matrix G;
  Matrix noiseCov;
  Eigen::Index dimActive() const noexcept { return f.size(); }
};

struct OutputModelD {
  Vector h;
  Matrix H;
  Matrix J;
  Matrix noiseCov;
  Eigen::Index dimActive() const noexcept { return H.cols(); }
};

using TransitionModel = std::variant<TransitionModelA, TransitionModelB, TransitionModelC, TransitionModelD>;
using OutputModel = std::variant<OutputModelA, OutputModelB, OutputModelC, OutputModelD>;

Eigen::Index activeDim(const TransitionModel& m);
Eigen::Index activeDim(const OutputModel& m);

// --- Linearization adapters ----------------------------------------------

inline constexpr double kDefaultJacobianStep = 1e-6;

/// Central differences with per-coordinate step relStep * (1 + |x_i|).
Matrix numericJacobian(const VecFn& fn, const Vector& x, double relStep = kDefaultJacobianStep);

/// f_b(x) = f_a(x, 0), G_b(x) = df_a/dw at (x, 0).
TransitionModelB lowerToB(const TransitionModelA& model, double jacobianStep = kDefaultJacobianStep);

/// h_b(x) = h_a(x, 0), J_b(x) = dh_a/dv at (x, 0). The noise Jacobian is
/// probed at `probe` (default: zero) and NonInvertibleJb is thrown if it is
/// singular there.
OutputModelB lowerToB(const OutputModelA& model, double jacobianStep = kDefaultJacobianStep,
                      std::optional<Vector> probe = std::nullopt);

/// Linearize in the linear rows about `linPoint` (given in partition.linear
/// order) and in the noise about zero.
TransitionModelC lowerToC(const TransitionModelA& model, const Vector& linPoint,
                          const RowPartition& partition, double jacobianStep = kDefaultJacobianStep);
TransitionModelC lowerToC(const TransitionModelB& model, const Vector& linPoint,
                          const RowPartition& partition, double jacobianStep = kDefaultJacobianStep);
OutputModelC lowerToC(const OutputModelA& model, const Vector& linPoint,
                      const RowPartition& partition, double jacobianStep = kDefaultJacobianStep);
OutputModelC lowerToC(const OutputModelB& model, const Vector& linPoint,
                      const RowPartition& partition, double jacobianStep = kDefaultJacobianStep);

/// Full linearization about `linPoint` (active block) and zero noise.
TransitionModelD lowerToD(const TransitionModelA& model, const Vector& linPoint,
                          double jacobianStep = kDefaultJacobianStep);
OutputModelD lowerToD(const OutputModelA& model, const Vector& linPoint,
                      double jacobianStep = kDefaultJacobianStep);
TransitionModelD lowerToD(const TransitionModelB& model, const Vector& linPoint,
                          double jacobianStep = kDefaultJacobianStep);
OutputModelD lowerToD(const OutputModelB& model, const Vector& linPoint,
                      double jacobianStep = kDefaultJacobianStep);
TransitionModelD lowerToD(const TransitionModelC& model, const Vector& linPoint,
                          double jacobianStep = kDefaultJacobianStep);
OutputModelD lowerToD(const OutputModelC& model, const Vector& linPoint,
                      double jacobianStep = kDefaultJacobianStep);

/// rows * belief.mean(): the usual linearization point.
Vector defaultLinPoint(const GaussianBelief& belief, const Matrix& rows);

}  // namespace mbf
