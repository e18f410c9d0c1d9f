#include "mbf/models.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mbf/rng.hpp"

namespace mbf {

NoiseModel NoiseModel::none() {
  NoiseModel n;
  n.dim = 0;
  n.gaussian = true;
  n.cov = Matrix(0, 0);
  n.sampler = [](std::uint64_t, std::uint64_t) { return Vector(0); };
  n.density = [](const Vector&) { return 1.0; };
  return n;
}

NoiseModel NoiseModel::gaussianNoise(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::DimensionMismatch, "noise covariance must be square");
  if (!isPsd(cov)) throw Error(ErrorCode::NotPsd, "noise covariance is not positive semidefinite");
  NoiseModel n;
  n.dim = cov.rows();
  n.gaussian = true;
  n.cov = symmetrized(cov);
  const Matrix root = gaussianSqrt(*n.cov);
  const Eigen::Index dim = n.dim;
  n.sampler = [root, dim](std::uint64_t seed, std::uint64_t index) -> Vector {
    return root * rng::normalVector(seed, index, dim);
  };
  const Matrix c = *n.cov;
  n.density = [c](const Vector& v) { return std::exp(gaussianLogPdf(v, Vector::Zero(v.size()), c)); };
  return n;
}

NoiseModel NoiseModel::custom(Eigen::Index dim, std::function<Vector(std::uint64_t, std::uint64_t)> sampler,
                              std::function<double(const Vector&)> density, std::optional<Matrix> cov) {
  NoiseModel n;
  n.dim = dim;
  n.gaussian = false;
  n.sampler = std::move(sampler);
  n.density = std::move(density);
  n.cov = std::move(cov);
  return n;
}

Vector NoiseModel::sample(std::uint64_t seed, std::uint64_t index) const {
  if (!sampler) throw Error(ErrorCode::InvalidArgument, "noise model has no sampler");
  return sampler(seed, index);
}

const Matrix& NoiseModel::covariance() const {
  if (!cov) throw Error(ErrorCode::InvalidArgument, "noise model has no finite covariance");
  return *cov;
}

void RowPartition::validate(Eigen::Index rows) const {
  std::vector<int> seen(static_cast<std::size_t>(std::max<Eigen::Index>(rows, 0)), 0);
  auto mark = [&](int r) {
    if (r < 0 || r >= rows) {
      std::ostringstream os;
      os << "row index " << r << " outside the active block of " << rows << " rows";
      throw Error(ErrorCode::BadPartition, os.str());
    }
    if (seen[static_cast<std::size_t>(r)]++ != 0) {
      throw Error(ErrorCode::BadPartition, "row " + std::to_string(r) + " listed twice");
    }
  };
  for (int r : nonlinear) mark(r);
  for (int r : linear) mark(r);
  for (std::size_t r = 0; r < seen.size(); ++r) {
    if (seen[r] == 0) throw Error(ErrorCode::BadPartition, "row " + std::to_string(r) + " not covered");
  }
  if (nonlinear.empty()) throw Error(ErrorCode::BadPartition, "nonlinear block must not be empty");
}

std::vector<int> RowPartition::order() const {
  std::vector<int> out = nonlinear;
  out.insert(out.end(), linear.begin(), linear.end());
  return out;
}

Eigen::Index activeDim(const TransitionModel& m) {
  return std::visit(
      [](const auto& x) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, TransitionModelD>) {
          return x.dimActive();
        } else {
          return x.dimActive;
        }
      },
      m);
}

Eigen::Index activeDim(const OutputModel& m) {
  return std::visit(
      [](const auto& x) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, OutputModelD>) {
          return x.dimActive();
        } else {
          return x.dimActive;
        }
      },
      m);
}

Matrix numericJacobian(const VecFn& fn, const Vector& x, double relStep) {
  const Vector f0 = fn(x);
  Matrix jac(f0.size(), x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = relStep * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const Vector up = fn(probe);
    probe(i) = x(i) - h;
    const Vector down = fn(probe);
    probe(i) = x(i);
    jac.col(i) = (up - down) / (2.0 * h);
  }
  return jac;
}

namespace {

Vector assemble(const RowPartition& p, const Vector& xn, const Vector& xl) {
  Vector x(static_cast<Eigen::Index>(p.nonlinear.size() + p.linear.size()));
  for (std::size_t i = 0; i < p.nonlinear.size(); ++i) x(p.nonlinear[i]) = xn(static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < p.linear.size(); ++i) x(p.linear[i]) = xl(static_cast<Eigen::Index>(i));
  return x;
}

Matrix selectCols(const Matrix& m, const std::vector<int>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

void checkLinPoint(const RowPartition& p, const Vector& linPoint) {
  if (linPoint.size() != static_cast<Eigen::Index>(p.linear.size())) {
    throw Error(ErrorCode::DimensionMismatch, "linearization point does not match the linear block");
  }
}

// d f(x, w)/dx at (x, 0), analytic when available.
Matrix jacX(const VecFn2& f, const MatFn2& analytic, const Vector& x, Eigen::Index noiseDim, double step) {
  const Vector zero = Vector::Zero(noiseDim);
  if (analytic) return analytic(x, zero);
  return numericJacobian([&](const Vector& xi) { return f(xi, zero); }, x, step);
}

Matrix jacNoise(const VecFn2& f, const MatFn2& analytic, const Vector& x, Eigen::Index noiseDim, double step) {
  const Vector zero = Vector::Zero(noiseDim);
  if (analytic) return analytic(x, zero);
  if (noiseDim == 0) return Matrix(f(x, zero).size(), 0);
  return numericJacobian([&](const Vector& w) { return f(x, w); }, zero, step);
}

void checkJbInvertible(const Matrix& j) {
  if (j.rows() != j.cols()) {
    throw Error(ErrorCode::NonInvertibleJb, "output noise Jacobian must be square");
  }
  if (j.rows() == 0) return;
  Eigen::FullPivLU<Matrix> lu(j);
  if (!lu.isInvertible() || !std::isfinite(lu.determinant()) || lu.determinant() == 0.0) {
    throw Error(ErrorCode::NonInvertibleJb, "output noise Jacobian is singular");
  }
}

}  // namespace

TransitionModelB lowerToB(const TransitionModelA& m, double step) {
  TransitionModelB b;
  b.dimActive = m.dimActive;
  b.noiseCov = m.noise.covariance();
  const Eigen::Index q = m.noise.dim;
  b.f = [m, q](const Vector& x) { return m.f(x, Vector::Zero(q)); };
  b.G = [m, q, step](const Vector& x) { return jacNoise(m.f, m.dfdw, x, q, step); };
  b.dfdx = [m, q, step](const Vector& x) { return jacX(m.f, m.dfdx, x, q, step); };
  return b;
}

OutputModelB lowerToB(const OutputModelA& m, double step, std::optional<Vector> probe) {
  if (m.noise.dim != m.dimOutput) {
    throw Error(ErrorCode::NonInvertibleJb, "output noise dimension must equal the output dimension");
  }
  if (!m.noise.density) throw Error(ErrorCode::InvalidArgument, "output noise has no density");
  OutputModelB b;
  b.dimActive = m.dimActive;
  b.dimOutput = m.dimOutput;
  b.noiseDensity = m.noise.density;
  b.noiseCov = m.noise.cov;
  const Eigen::Index q = m.noise.dim;
  b.h = [m, q](const Vector& x) { return m.h(x, Vector::Zero(q)); };
  b.J = [m, q, step](const Vector& x) { return jacNoise(m.h, m.dhdv, x, q, step); };
  b.dhdx = [m, q, step](const Vector& x) { return jacX(m.h, m.dhdx, x, q, step); };
  checkJbInvertible(b.J(probe.value_or(Vector::Zero(m.dimActive))));
  return b;
}

TransitionModelC lowerToC(const TransitionModelA& m, const Vector& linPoint, const RowPartition& p,
                          double step) {
  p.validate(m.dimActive);
  checkLinPoint(p, linPoint);
  TransitionModelC c;
  c.dimActive = m.dimActive;
  c.partition = p;
  c.noiseCov = m.noise.covariance();
  const Eigen::Index q = m.noise.dim;
  c.F = [m, p, linPoint, q, step](const Vector& xn) {
    return selectCols(jacX(m.f, m.dfdx, assemble(p, xn, linPoint), q, step), p.linear);
  };
  c.G = [m, p, linPoint, q, step](const Vector& xn) {
    return jacNoise(m.f, m.dfdw, assemble(p, xn, linPoint), q, step);
  };
  const MatFn F = c.F;
  c.f = [m, p, linPoint, q, F](const Vector& xn) -> Vector {
    return m.f(assemble(p, xn, linPoint), Vector::Zero(q)) - F(xn) * linPoint;
  };
  return c;
}

TransitionModelC lowerToC(const TransitionModelB& m, const Vector& linPoint, const RowPartition& p,
                          double step) {
  p.validate(m.dimActive);
  checkLinPoint(p, linPoint);
  TransitionModelC c;
  c.dimActive = m.dimActive;
  c.partition = p;
  c.noiseCov = m.noiseCov;
  c.F = [m, p, linPoint, step](const Vector& xn) {
    const Vector x = assemble(p, xn, linPoint);
    return selectCols(m.dfdx ? m.dfdx(x) : numericJacobian(m.f, x, step), p.linear);
  };
  c.G = [m, p, linPoint](const Vector& xn) { return m.G(assemble(p, xn, linPoint)); };
  const MatFn F = c.F;
  c.f = [m, p, linPoint, F](const Vector& xn) -> Vector {
    return m.f(assemble(p, xn, linPoint)) - F(xn) * linPoint;
  };
  return c;
}

OutputModelC lowerToC(const OutputModelA& m, const Vector& linPoint, const RowPartition& p, double step) {
  p.validate(m.dimActive);
  checkLinPoint(p, linPoint);
  OutputModelC c;
  c.dimActive = m.dimActive;
  c.dimOutput = m.dimOutput;
  c.partition = p;
  c.noiseCov = m.noise.covariance();
  const Eigen::Index q = m.noise.dim;
  c.H = [m, p, linPoint, q, step](const Vector& xn) {
    return selectCols(jacX(m.h, m.dhdx, assemble(p, xn, linPoint), q, step), p.linear);
  };
  c.J = [m, p, linPoint, q, step](const Vector& xn) {
    return jacNoise(m.h, m.dhdv, assemble(p, xn, linPoint), q, step);
  };
  const MatFn H = c.H;
  c.h = [m, p, linPoint, q, H](const Vector& xn) -> Vector {
    return m.h(assemble(p, xn, linPoint), Vector::Zero(q)) - H(xn) * linPoint;
  };
  return c;
}

OutputModelC lowerToC(const OutputModelB& m, const Vector& linPoint, const RowPartition& p, double step) {
  p.validate(m.dimActive);
  checkLinPoint(p, linPoint);
  if (!m.noiseCov) throw Error(ErrorCode::InvalidArgument, "output noise has no finite covariance");
  OutputModelC c;
  c.dimActive = m.dimActive;
  c.dimOutput = m.dimOutput;
  c.partition = p;
  c.noiseCov = *m.noiseCov;
  c.H = [m, p, linPoint, step](const Vector& xn) {
    const Vector x = assemble(p, xn, linPoint);
    return selectCols(m.dhdx ? m.dhdx(x) : numericJacobian(m.h, x, step), p.linear);
  };
  c.J = [m, p, linPoint](const Vector& xn) { return m.J(assemble(p, xn, linPoint)); };
  const MatFn H = c.H;
  c.h = [m, p, linPoint, H](const Vector& xn) -> Vector {
    return m.h(assemble(p, xn, linPoint)) - H(xn) * linPoint;
  };
  return c;
}

TransitionModelD lowerToD(const TransitionModelA& m, const Vector& linPoint, double step) {
  if (linPoint.size() != m.dimActive) {
    throw Error(ErrorCode::DimensionMismatch, "linearization point does not match the active block");
  }
  const Eigen::Index q = m.noise.dim;
  TransitionModelD d;
  d.F = jacX(m.f, m.dfdx, linPoint, q, step);
  d.G = jacNoise(m.f, m.dfdw, linPoint, q, step);
  d.f = m.f(linPoint, Vector::Zero(q)) - d.F * linPoint;
  d.noiseCov = m.noise.covariance();
  return d;
}

OutputModelD lowerToD(const OutputModelA& m, const Vector& linPoint, double step) {
  if (linPoint.size() != m.dimActive) {
    throw Error(ErrorCode::DimensionMismatch, "linearization point does not match the active block");
  }
  const Eigen::Index q = m.noise.dim;
  OutputModelD d;
  d.H = jacX(m.h, m.dhdx, linPoint, q, step);
  d.J = jacNoise(m.h, m.dhdv, linPoint, q, step);
  d.h = m.h(linPoint, Vector::Zero(q)) - d.H * linPoint;
  d.noiseCov = m.noise.covariance();
  return d;
}

namespace {

void checkActivePoint(Eigen::Index dim, const Vector& linPoint) {
  if (linPoint.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "linearization point does not match the active block");
  }
}

}  // namespace

TransitionModelD lowerToD(const TransitionModelB& m, const Vector& linPoint, double step) {
  checkActivePoint(m.dimActive, linPoint);
  TransitionModelD d;
  d.F = m.dfdx ? m.dfdx(linPoint) : numericJacobian(m.f, linPoint, step);
  d.G = m.G(linPoint);
  d.f = m.f(linPoint) - d.F * linPoint;
  d.noiseCov = m.noiseCov;
  return d;
}

OutputModelD lowerToD(const OutputModelB& m, const Vector& linPoint, double step) {
  checkActivePoint(m.dimActive, linPoint);
  if (!m.noiseCov) throw Error(ErrorCode::InvalidArgument, "output noise has no finite covariance");
  OutputModelD d;
  d.H = m.dhdx ? m.dhdx(linPoint) : numericJacobian(m.h, linPoint, step);
  d.J = m.J(linPoint);
  d.h = m.h(linPoint) - d.H * linPoint;
  d.noiseCov = *m.noiseCov;
  return d;
}

TransitionModelD lowerToD(const TransitionModelC& m, const Vector& linPoint, double step) {
  checkActivePoint(m.dimActive, linPoint);
  m.partition.validate(m.dimActive);
  const RowPartition p = m.partition;
  const VecFn full = [&m, &p](const Vector& x) -> Vector {
    return m.f(selectRows(x, p.nonlinear)) + m.F(selectRows(x, p.nonlinear)) * selectRows(x, p.linear);
  };
  TransitionModelD d;
  d.F = numericJacobian(full, linPoint, step);
  d.G = m.G(selectRows(linPoint, p.nonlinear));
  d.f = full(linPoint) - d.F * linPoint;
  d.noiseCov = m.noiseCov;
  return d;
}

OutputModelD lowerToD(const OutputModelC& m, const Vector& linPoint, double step) {
  checkActivePoint(m.dimActive, linPoint);
  m.partition.validate(m.dimActive);
  const RowPartition p = m.partition;
  const VecFn full = [&m, &p](const Vector& x) -> Vector {
    return m.h(selectRows(x, p.nonlinear)) + m.H(selectRows(x, p.nonlinear)) * selectRows(x, p.linear);
  };
  OutputModelD d;
  d.H = numericJacobian(full, linPoint, step);
  d.J = m.J(selectRows(linPoint, p.nonlinear));
  d.h = full(linPoint) - d.H * linPoint;
  d.noiseCov = m.noiseCov;
  return d;
}

Vector defaultLinPoint(const GaussianBelief& belief, const Matrix& rows) {
  if (rows.cols() != belief.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "rows do not match the belief dimension");
  }
  return rows * belief.mean();
}

}  // namespace mbf
