#include "mbf/gaussian.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <limits>
#include <sstream>

namespace mbf {

GaussianBelief::GaussianBelief(Vector mean, const Matrix& cov) : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
    std::ostringstream os;
    os << "belief mean has " << mean_.size() << " entries but covariance is " << cov.rows()
       << "x" << cov.cols();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (!mean_.allFinite() || !cov.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "belief contains non-finite values");
  }
  cov_ = symmetrized(cov);
  if (!isPsd(cov_)) throw Error(ErrorCode::NotPsd, "belief covariance is not positive semidefinite");
}

GaussianBelief project(const GaussianBelief& belief, const Matrix& rows) {
  if (rows.cols() != belief.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "projection rows do not match the belief dimension");
  }
  return {rows * belief.mean(), rows * belief.cov() * rows.transpose()};
}

SubspaceSplit makeSplit(const Matrix& active, const Matrix& inactive, double conditionLimit) {
  const Eigen::Index n = active.cols();
  if (inactive.cols() != n || active.rows() + inactive.rows() != n) {
    std::ostringstream os;
    os << "split blocks " << active.rows() << "x" << active.cols() << " and " << inactive.rows()
       << "x" << inactive.cols() << " do not stack to a square matrix";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  SubspaceSplit s;
  s.active_ = active;
  s.inactive_ = inactive;
  if (n == 0) {
    s.invActive_ = Matrix(0, 0);
    s.invInactive_ = Matrix(0, 0);
    return s;
  }
  Matrix stacked(n, n);
  stacked << active, inactive;
  if (!stacked.allFinite()) throw Error(ErrorCode::SingularSplit, "split contains non-finite entries");

  Eigen::JacobiSVD<Matrix> svd(stacked);
  const auto& sv = svd.singularValues();
  const double smin = sv(n - 1);
  s.condition_ = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(s.condition_ <= conditionLimit)) {
    std::ostringstream os;
    os << "stacked split matrix has condition number " << s.condition_ << " (limit "
       << conditionLimit << ")";
    throw Error(ErrorCode::SingularSplit, os.str());
  }
  const Matrix inv = Eigen::FullPivLU<Matrix>(stacked).inverse();
  s.invActive_ = inv.leftCols(active.rows());
  s.invInactive_ = inv.rightCols(inactive.rows());
  return s;
}

SubspaceSplit trivialSplit(Eigen::Index n) {
  return makeSplit(Matrix::Identity(n, n), Matrix(0, n));
}

Matrix inactiveGain(const GaussianBelief& belief, const SubspaceSplit& split, bool* jittered) {
  if (split.stateDim() != belief.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "split does not match the belief dimension");
  }
  const Matrix& a = split.active();
  const Matrix& b = split.inactive();
  if (b.rows() == 0 || a.rows() == 0) return Matrix::Zero(b.rows(), a.rows());
  const Matrix activeCov = a * belief.cov() * a.transpose();
  const Matrix crossT = a * belief.cov() * b.transpose();  // (inactive P active^T)^T
  const Matrix sol = spdSolve(activeCov, crossT, ErrorCode::DegenerateActiveCov, jittered);
  return sol.transpose();
}

ConditionalGaussian conditionOnSub(const GaussianBelief& belief, const Matrix& given,
                                   const Matrix& target, bool* jittered) {
  if (given.cols() != belief.dim() || target.cols() != belief.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "conditioning rows do not match the belief dimension");
  }
  const Matrix& p = belief.cov();
  ConditionalGaussian c;
  c.baseMean = target * belief.mean();
  c.refMean = given * belief.mean();
  const Matrix targetTarget = target * p * target.transpose();
  if (given.rows() == 0) {
    c.gain = Matrix::Zero(target.rows(), 0);
    c.cov = symmetrized(targetTarget);
    return c;
  }
  const Matrix givenGiven = given * p * given.transpose();
  const Matrix givenTarget = given * p * target.transpose();
  c.gain = spdSolve(givenGiven, givenTarget, ErrorCode::DegenerateActiveCov, jittered).transpose();
  c.cov = symmetrized(targetTarget - c.gain * givenTarget);
  return c;
}

}  // namespace mbf
