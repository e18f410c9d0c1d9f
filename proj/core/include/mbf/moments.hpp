#pragma once

#include <cstddef>
#include <functional>

#include "mbf/gaussian.hpp"
#include "mbf/kde.hpp"
#include "mbf/models.hpp"
#include "mbf/quadrature.hpp"

// Marginal moments of the active blocks. Prediction produces
//   S_A x_k mean, its covariance, and its cross-covariance with S_A x_{k-1};
// update produces the posterior mean and covariance of T_A x_k.
// Numerical integrals are two-pass: the mean first, then centered second
// moments over the identical node set.
namespace mbf {

struct MomentDiagnostics {
  std::size_t nodeCount = 0;
  bool jitterApplied = false;
  bool mcFallback = false;
  bool bandwidthFloored = false;

  void merge(const MomentDiagnostics& other);
};

struct PredictionMoments {
  Vector activeMean;
  Matrix activeCov;
  Matrix crossCov;  ///< Cov(S_A x_k, S_A x_{k-1})
  MomentDiagnostics diagnostics;
};

struct UpdateMoments {
  Vector activeMean;
  Matrix activeCov;
  MomentDiagnostics diagnostics;
};

/// p(y | T_A x) up to scale: (y, T_A x) -> value >= 0.
using LikelihoodFn = std::function<double(const Vector&, const Vector&)>;

/// Per-node quantities of the level-c prediction, in partition order
/// (nonlinear rows, then linear rows). Centered terms are filled by
/// `center`.
struct CLevelPredictionScratch {
  Vector phi;    ///< E[S_A^l x_{k-1} | node]
  Matrix Phi;    ///< Cov[S_A^l x_{k-1} | node]
  Vector pi;     ///< f^n + F^n phi
  Vector eps;    ///< f^l + F^l phi
  Matrix XiN;    ///< F^n Phi F^n' + G^n P_w G^n'  (also Pi)
  Matrix XiLN;   ///< F^l Phi F^n' + G^l P_w G^n'
  Matrix XiL;    ///< F^l Phi F^l' + G^l P_w G^l'
  Matrix Xi;     ///< XiLN XiN^-1
  Matrix Gamma;  ///< Phi F^n' XiN^-1
  Matrix Palpha;
  Matrix PalphaBeta;
  Vector gamma, alpha, beta, delta;
  bool jittered = false;

  const Matrix& Pi() const noexcept { return XiN; }

  /// gamma = pi - meanN, alpha = eps - meanL, beta = phi - priorL,
  /// delta = node - priorN.
  void center(const Vector& node, const Vector& meanN, const Vector& meanL, const Vector& priorN,
              const Vector& priorL);
};

/// Evaluate the level-c prediction quantities at one nonlinear-block node.
/// `linGivenNonlinear` is the prior of S_A^l x_{k-1} given S_A^n x_{k-1}.
/// Throws SingularXiN when XiN cannot be factored.
CLevelPredictionScratch cLevelPredictionScratch(const TransitionModelC& model,
                                                const ConditionalGaussian& linGivenNonlinear,
                                                const Vector& node);

/// Per-node quantities of the level-c update.
struct CLevelUpdateScratch {
  Vector psi;       ///< E[T_A^l x | node]
  Matrix Psi;       ///< Cov[T_A^l x | node]
  Vector varsigma;  ///< h^c + H^c psi
  Matrix Sigma;     ///< H^c Psi H^c' + J^c P_v J^c'
  Matrix gain;      ///< Psi H^c' Sigma^-1
  Vector omega;     ///< psi + gain (y - varsigma)
  Matrix Omega;     ///< (I - gain H^c) Psi
  double likelihood = 0.0;  ///< N(y; varsigma, Sigma)
  Vector varkappa, kappa;
  bool jittered = false;

  /// varkappa = node - meanN, kappa = omega - meanL.
  void center(const Vector& node, const Vector& meanN, const Vector& meanL);
};

/// Throws SingularSigma when Sigma cannot be factored.
CLevelUpdateScratch cLevelUpdateScratch(const OutputModelC& model,
                                        const ConditionalGaussian& linGivenNonlinear,
                                        const Vector& node, const Vector& y);

// --- Prediction --------------------------------------------------------------

/// Integrates over the joint (S_A x_{k-1}, w). Deterministic rules need
/// Gaussian noise (RuleUnsupportedForNoise otherwise); Monte Carlo pairs
/// prior draws with draws from the noise sampler.
PredictionMoments predictA(const TransitionModelA& model, const GaussianBelief& priorActive,
                           const IntegrationRule& rule);

PredictionMoments predictB(const TransitionModelB& model, const GaussianBelief& priorActive,
                           const IntegrationRule& rule);

/// Integrates over the nonlinear block only; the linear block is handled
/// in closed form given each node.
PredictionMoments predictC(const TransitionModelC& model, const GaussianBelief& priorFull,
                           const SubspaceSplit& split, const IntegrationRule& rule);

PredictionMoments predictD(const TransitionModelD& model, const GaussianBelief& priorActive);

// --- Update ------------------------------------------------------------------

/// Self-normalized posterior moments under an explicit likelihood. Throws
/// DegenerateUpdate when sum_i w_i L_i <= 1e-300.
UpdateMoments updateLikelihood(const LikelihoodFn& likelihood, const GaussianBelief& priorActive,
                               const Vector& y, const IntegrationRule& rule);

/// As updateLikelihood with the likelihood estimated by a kernel density
/// over noise samples. A Monte Carlo `noiseRule` draws from the model's
/// noise sampler; other rules need Gaussian noise. The same noise samples
/// are shared by every node.
UpdateMoments updateA_KDE(const OutputModelA& model, const GaussianBelief& priorActive,
                          const Vector& y, const IntegrationRule& rule, const KernelConfig& kernel,
                          const IntegrationRule& noiseRule);

/// Likelihood |det J|^-1 p_v(J^-1 (y - h)). Throws NonInvertibleJb.
UpdateMoments updateB(const OutputModelB& model, const GaussianBelief& priorActive,
                      const Vector& y, const IntegrationRule& rule);

UpdateMoments updateC(const OutputModelC& model, const GaussianBelief& predictedFull,
                      const SubspaceSplit& split, const Vector& y, const IntegrationRule& rule);

/// Kalman update of the active block. Throws SingularInnovationCov.
UpdateMoments updateD(const OutputModelD& model, const GaussianBelief& priorActive,
                      const Vector& y);

/// Joint-Gaussian approximation of (T_A x, y): output mean, covariance and
/// cross-covariance by the rule, then the Kalman gain formulas.
UpdateMoments updateParametric(const OutputModelA& model, const GaussianBelief& priorActive,
                               const Vector& y, const IntegrationRule& rule);

}  // namespace mbf
