#include "mbf/harness/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mbf::harness {

namespace {

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// F_full = S' F S_A + S'' S_B for a linear active map F.
Matrix embedLinear(const SubspaceSplit& split, const Matrix& F) {
  return split.invActive() * F * split.active() + split.invInactive() * split.inactive();
}

Vector embedMean(const SubspaceSplit& split, const Vector& activeNext, const Vector& x) {
  return split.invActive() * activeNext + split.invInactive() * (split.inactive() * x);
}

GaussianBelief gainUpdate(const GaussianBelief& b, const Matrix& Pxy, const Matrix& S,
                          const Vector& innovation) {
  const Eigen::LDLT<Matrix> ldlt(S);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw Error(ErrorCode::SingularInnovationCov, "baseline innovation covariance is singular");
  }
  const Matrix K = ldlt.solve(Matrix(Pxy.transpose())).transpose();
  return {b.mean() + K * innovation, sym(b.cov() - K * S * K.transpose())};
}

Matrix sqrtFactor(const Matrix& c) {
  const Eigen::LLT<Matrix> llt(c);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sym(c));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct Sigma {
  std::vector<Vector> points;
  std::vector<double> weights;
};

// 2L+1 points of N([mean; 0], blkdiag(cov, noiseCov)).
Sigma sigmaPoints(const Vector& mean, const Matrix& cov, const Matrix& noiseCov) {
  const Eigen::Index n = mean.size(), q = noiseCov.rows(), L = n + q;
  Vector m = Vector::Zero(L);
  m.head(n) = mean;
  Matrix c = Matrix::Zero(L, L);
  c.topLeftCorner(n, n) = cov;
  c.bottomRightCorner(q, q) = noiseCov;
  const double kappa = std::max(3.0 - static_cast<double>(L), 0.0);
  const Matrix root = sqrtFactor((static_cast<double>(L) + kappa) * c);
  Sigma s;
  s.points.push_back(m);
  s.weights.push_back(kappa / (static_cast<double>(L) + kappa));
  for (Eigen::Index i = 0; i < L; ++i) {
    s.points.push_back(m + root.col(i));
    s.points.push_back(m - root.col(i));
    s.weights.push_back(0.5 / (static_cast<double>(L) + kappa));
    s.weights.push_back(0.5 / (static_cast<double>(L) + kappa));
  }
  return s;
}

}  // namespace

GaussianBelief kalmanPredict(const GaussianBelief& b, const SubspaceSplit& split,
                             const TransitionModelD& m) {
  const Matrix F = embedLinear(split, m.F);
  const Matrix G = split.invActive() * m.G;
  const Vector mean = split.invActive() * m.f + F * b.mean();
  return {mean, sym(F * b.cov() * F.transpose() + G * m.noiseCov * G.transpose())};
}

GaussianBelief kalmanUpdate(const GaussianBelief& b, const SubspaceSplit& split,
                            const OutputModelD& m, const Vector& y) {
  const Matrix H = m.H * split.active();
  const Matrix Pxy = b.cov() * H.transpose();
  const Matrix S = H * Pxy + m.J * m.noiseCov * m.J.transpose();
  return gainUpdate(b, Pxy, S, y - m.h - H * b.mean());
}

GaussianBelief ekfPredict(const GaussianBelief& b, const SubspaceSplit& split,
                          const TransitionModelA& m, double step) {
  const Eigen::Index q = m.noise.dim;
  const Vector zero = Vector::Zero(q);
  auto full = [&](const Vector& x) -> Vector { return embedMean(split, m.f(split.active() * x, zero), x); };
  const Vector xa = split.active() * b.mean();
  const Matrix F = m.dfdx ? embedLinear(split, m.dfdx(xa, zero)) : numericJacobian(full, b.mean(), step);
  Matrix Gw;
  if (m.dfdw) {
    Gw = m.dfdw(xa, zero);
  } else {
    Gw = numericJacobian([&](const Vector& w) { return m.f(xa, w); }, zero, step);
  }
  const Matrix G = split.invActive() * Gw;
  return {full(b.mean()), sym(F * b.cov() * F.transpose() + G * m.noise.covariance() * G.transpose())};
}

GaussianBelief ekfUpdate(const GaussianBelief& b, const SubspaceSplit& split, const OutputModelA& m,
                         const Vector& y, double step) {
  const Eigen::Index q = m.noise.dim;
  const Vector zero = Vector::Zero(q);
  const Vector xa = split.active() * b.mean();
  auto full = [&](const Vector& x) -> Vector { return m.h(split.active() * x, zero); };
  const Matrix H = m.dhdx ? Matrix(m.dhdx(xa, zero) * split.active()) : numericJacobian(full, b.mean(), step);
  Matrix J;
  if (m.dhdv) {
    J = m.dhdv(xa, zero);
  } else {
    J = numericJacobian([&](const Vector& v) { return m.h(xa, v); }, zero, step);
  }
  const Matrix Pxy = b.cov() * H.transpose();
  const Matrix S = H * Pxy + J * m.noise.covariance() * J.transpose();
  return gainUpdate(b, Pxy, S, y - full(b.mean()));
}

GaussianBelief ukfPredict(const GaussianBelief& b, const SubspaceSplit& split, const TransitionModelA& m) {
  const Eigen::Index n = b.dim(), q = m.noise.dim;
  const Sigma s = sigmaPoints(b.mean(), b.cov(), m.noise.covariance());
  std::vector<Vector> out;
  Vector mean = Vector::Zero(n);
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vector x = s.points[i].head(n);
    out.push_back(embedMean(split, m.f(split.active() * x, s.points[i].tail(q)), x));
    mean += s.weights[i] * out.back();
  }
  Matrix cov = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vector d = out[i] - mean;
    cov += s.weights[i] * d * d.transpose();
  }
  return {mean, sym(cov)};
}

GaussianBelief ukfUpdate(const GaussianBelief& b, const SubspaceSplit& split, const OutputModelA& m,
                         const Vector& y) {
  const Eigen::Index n = b.dim(), q = m.noise.dim;
  const Sigma s = sigmaPoints(b.mean(), b.cov(), m.noise.covariance());
  std::vector<Vector> out;
  Vector yMean = Vector::Zero(y.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    out.push_back(m.h(split.active() * s.points[i].head(n), s.points[i].tail(q)));
    yMean += s.weights[i] * out.back();
  }
  Matrix S = Matrix::Zero(y.size(), y.size());
  Matrix Pxy = Matrix::Zero(n, y.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vector dy = out[i] - yMean;
    S += s.weights[i] * dy * dy.transpose();
    Pxy += s.weights[i] * (s.points[i].head(n) - b.mean()) * dy.transpose();
  }
  return gainUpdate(b, Pxy, sym(S), y - yMean);
}

}  // namespace mbf::harness
