#include "mbf/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>

namespace mbf {
namespace {

// Pivots below this fraction of the largest diagonal entry count as a failed
// factorization (reciprocal condition number around 1e-14).
constexpr double kRelativePivotFloor = 1e-14;
constexpr double kJitterScale = 1e-12;

bool factorOk(const Eigen::LLT<Matrix>& llt, double maxDiag) {
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double d = diag(i);
    if (!std::isfinite(d) || d <= 0.0 || d * d <= kRelativePivotFloor * maxDiag) return false;
  }
  return true;
}

}  // namespace

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

bool isPsd(const Matrix& a, double relTol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  if (!a.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return ev.minCoeff() >= -relTol * scale;
}

SpdFactor::SpdFactor(const Matrix& a, ErrorCode onFailure, std::string_view what)
    : size_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "SPD factorization of a non-square matrix");
  }
  if (size_ == 0) return;
  const Matrix sym = symmetrized(a);
  const double maxDiag = sym.diagonal().maxCoeff();
  llt_.compute(sym);
  if (factorOk(llt_, maxDiag)) return;

  const double jitter = kJitterScale * sym.diagonal().mean();
  if (jitter > 0.0 && std::isfinite(jitter)) {
    Matrix bumped = sym;
    bumped.diagonal().array() += jitter;
    llt_.compute(bumped);
    if (factorOk(llt_, maxDiag)) {
      jittered_ = true;
      return;
    }
  }
  std::string msg = "matrix not positive definite after jitter retry";
  if (!what.empty()) msg += " (" + std::string(what) + ")";
  throw Error(onFailure, msg);
}

Matrix SpdFactor::solve(const Matrix& rhs) const {
  if (size_ == 0) return Matrix(0, rhs.cols());
  return llt_.solve(rhs);
}

Vector SpdFactor::solve(const Vector& rhs) const {
  if (size_ == 0) return Vector(0);
  return llt_.solve(rhs);
}

Matrix SpdFactor::inverse() const { return solve(Matrix(Matrix::Identity(size_, size_))); }

Matrix SpdFactor::lower() const {
  if (size_ == 0) return Matrix(0, 0);
  return llt_.matrixL();
}

double SpdFactor::logDeterminant() const {
  if (size_ == 0) return 0.0;
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix spdSolve(const Matrix& a, const Matrix& b, ErrorCode onFailure, bool* jittered) {
  SpdFactor f(a, onFailure);
  if (jittered != nullptr && f.jittered()) *jittered = true;
  return f.solve(b);
}

Matrix gaussianSqrt(const Matrix& cov) {
  if (cov.rows() != cov.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
  }
  const Eigen::Index d = cov.rows();
  if (d == 0) return Matrix(0, 0);
  const Matrix sym = symmetrized(cov);
  Eigen::LLT<Matrix> llt(sym);
  if (factorOk(llt, sym.diagonal().maxCoeff())) return llt.matrixL();

  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (ev.minCoeff() < -1e-10 * scale) {
    throw Error(ErrorCode::NotPsd, "covariance is not positive semidefinite");
  }
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Matrix selectRows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Vector selectRows(const Vector& v, std::span<const int> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

double gaussianLogPdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  SpdFactor f(cov, ErrorCode::SingularSigma, "Gaussian density covariance");
  const Vector r = x - mean;
  const double maha = r.dot(f.solve(r));
  const double k = static_cast<double>(x.size());
  return -0.5 * (maha + f.logDeterminant() + k * std::log(2.0 * std::numbers::pi));
}

double maxAbsDiff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace mbf
