#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <span>
#include <vector>

#include "mbf/errors.hpp"

namespace mbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// (A + A^T) / 2.
Matrix symmetrized(const Matrix& a);

/// Smallest eigenvalue >= -tol * max(|largest eigenvalue|, tiny).
bool isPsd(const Matrix& a, double relTol = 1e-10);

/// Cholesky factor of a symmetric positive definite matrix.
///
/// Factorization is attempted once as given and, on failure, once more with
/// 1e-12 * (mean diagonal) added to the diagonal. A matrix that still fails
/// raises `Error(onFailure)`; no further regularization is applied.
/// Zero-sized matrices are valid and factor trivially.
class SpdFactor {
public:
  SpdFactor(const Matrix& a, ErrorCode onFailure, std::string_view what = {});

  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;
  Matrix inverse() const;
  /// Lower-triangular L with L L^T equal to the (possibly jittered) matrix.
  Matrix lower() const;
  double logDeterminant() const;
  bool jittered() const noexcept { return jittered_; }
  Eigen::Index size() const noexcept { return size_; }

private:
  Eigen::LLT<Matrix> llt_;
  Eigen::Index size_ = 0;
  bool jittered_ = false;
};

/// Solve A X = B for SPD A using the single-jitter policy above.
Matrix spdSolve(const Matrix& a, const Matrix& b, ErrorCode onFailure,
                bool* jittered = nullptr);

/// Square-root factor F with F F^T = cov, for transforming standard-normal
/// nodes. Cholesky when possible; symmetric eigen square root for PSD
/// matrices that are numerically singular (e.g. exactly known components).
Matrix gaussianSqrt(const Matrix& cov);

/// Select rows of `m` by index, in the given order.
Matrix selectRows(const Matrix& m, std::span<const int> rows);
Vector selectRows(const Vector& v, std::span<const int> rows);

/// Log-density of N(mean, cov) at x.
double gaussianLogPdf(const Vector& x, const Vector& mean, const Matrix& cov);

/// Largest entry-wise absolute difference; infinity on shape mismatch.
double maxAbsDiff(const Matrix& a, const Matrix& b);

}  // namespace mbf
