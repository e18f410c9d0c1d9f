#pragma once

#include "mbf/gaussian.hpp"
#include "mbf/models.hpp"

// Full-state comparators. They never marginalize: the active-block models
// are embedded in full-state functions x -> S' f(S_A x) + S'' S_B x and
// filtered with the textbook formulas.
namespace mbf::harness {

GaussianBelief kalmanPredict(const GaussianBelief& belief, const SubspaceSplit& split,
                             const TransitionModelD& model);
GaussianBelief kalmanUpdate(const GaussianBelief& belief, const SubspaceSplit& split,
                            const OutputModelD& model, const Vector& y);

/// Jacobians are analytic when the model supplies them, central
/// differences of the embedded function otherwise.
GaussianBelief ekfPredict(const GaussianBelief& belief, const SubspaceSplit& split,
                          const TransitionModelA& model, double jacobianStep = kDefaultJacobianStep);
GaussianBelief ekfUpdate(const GaussianBelief& belief, const SubspaceSplit& split,
                         const OutputModelA& model, const Vector& y,
                         double jacobianStep = kDefaultJacobianStep);

/// Augmented-state unscented filter (sigma points over [x; noise]) with
/// spread kappa = max(3 - L, 0) for augmented dimension L.
GaussianBelief ukfPredict(const GaussianBelief& belief, const SubspaceSplit& split,
                          const TransitionModelA& model);
GaussianBelief ukfUpdate(const GaussianBelief& belief, const SubspaceSplit& split,
                         const OutputModelA& model, const Vector& y);

}  // namespace mbf::harness
