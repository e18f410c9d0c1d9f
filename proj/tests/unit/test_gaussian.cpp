#include <Eigen/Eigenvalues>

#include "mbf/gaussian.hpp"
#include "test_util.hpp"

using namespace mbf;
using test::Random;
using test::vec;

TEST(GaussianBelief, SymmetrizesOnConstruction) {
  const Matrix p = (Matrix(2, 2) << 2, 1, 1 + 1e-14, 2).finished();
  const GaussianBelief b(vec({0, 0}), p);
  EXPECT_EQ(b.cov()(0, 1), b.cov()(1, 0));
}

TEST(GaussianBelief, RejectsBadInput) {
  EXPECT_ERROR_CODE(GaussianBelief(vec({0}), Matrix::Identity(2, 2)), ErrorCode::DimensionMismatch);
  EXPECT_ERROR_CODE(GaussianBelief(vec({0, 0}), (Matrix(2, 2) << 1, 2, 2, 1).finished()), ErrorCode::NotPsd);
  EXPECT_ERROR_CODE(GaussianBelief(vec({NAN}), test::scalar(1)), ErrorCode::InvalidArgument);
}

TEST(GaussianBelief, ZeroDimensionIsValid) {
  const GaussianBelief b(Vector(0), Matrix(0, 0));
  EXPECT_EQ(b.dim(), 0);
}

TEST(Project, SelectsMarginal) {
  const GaussianBelief b(vec({1, 2}), (Matrix(2, 2) << 2, 1, 1, 3).finished());
  const auto p = project(b, (Matrix(1, 2) << 0, 1).finished());
  EXPECT_DOUBLE_EQ(p.mean()(0), 2.0);
  EXPECT_DOUBLE_EQ(p.cov()(0, 0), 3.0);
  EXPECT_ERROR_CODE(project(b, Matrix::Identity(3, 3)), ErrorCode::DimensionMismatch);
}

TEST(MakeSplit, IdentityPartition) {
  const auto s = makeSplit((Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished());
  EXPECT_MAT_NEAR(s.invActive(), (Matrix(2, 1) << 1, 0).finished(), 0.0);
  EXPECT_MAT_NEAR(s.invInactive(), (Matrix(2, 1) << 0, 1).finished(), 0.0);
}

TEST(MakeSplit, Permutation) {
  const auto s = makeSplit((Matrix(1, 2) << 0, 1).finished(), (Matrix(1, 2) << 1, 0).finished());
  EXPECT_MAT_NEAR(s.invActive(), (Matrix(2, 1) << 0, 1).finished(), 1e-15);
  EXPECT_MAT_NEAR(s.invInactive(), (Matrix(2, 1) << 1, 0).finished(), 1e-15);
}

TEST(MakeSplit, BlocksMatchDenseInverse) {
  Random r(3);
  const Matrix t = r.orthogonal(3) + 0.3 * r.matrix(3, 3);
  const auto s = makeSplit(t.topRows(1), t.bottomRows(2));
  const Matrix inv = t.inverse();
  EXPECT_MAT_NEAR(s.invActive(), inv.leftCols(1), 1e-12);
  EXPECT_MAT_NEAR(s.invInactive(), inv.rightCols(2), 1e-12);
}

TEST(MakeSplit, Errors) {
  EXPECT_ERROR_CODE(makeSplit(Matrix::Ones(1, 2), Matrix::Ones(1, 2)), ErrorCode::SingularSplit);
  EXPECT_ERROR_CODE(makeSplit(Matrix::Ones(1, 2), Matrix::Ones(2, 2)), ErrorCode::DimensionMismatch);
  const Matrix nearSingular = (Matrix(1, 2) << 1, 1e-13).finished();
  EXPECT_ERROR_CODE(makeSplit((Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 1, 1e-13).finished()),
                    ErrorCode::SingularSplit);
  EXPECT_NO_THROW(makeSplit((Matrix(1, 2) << 1, 0).finished(), nearSingular, 1e14));
}

TEST(MakeSplit, EmptyBlocksAreLegal) {
  const auto full = trivialSplit(3);
  EXPECT_EQ(full.activeDim(), 3);
  EXPECT_EQ(full.inactive().rows(), 0);
  EXPECT_MAT_NEAR(full.invActive(), Matrix::Identity(3, 3), 0.0);
  const auto none = makeSplit(Matrix(0, 2), Matrix::Identity(2, 2));
  EXPECT_EQ(none.activeDim(), 0);
  EXPECT_EQ(none.invActive().cols(), 0);
}

// Property: the cached inverse blocks satisfy the block identities and
// reconstruct any state from its projections.
TEST(MakeSplitProperty, RoundTrip) {
  Random r(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 2 + trial % 5, a = 1 + trial % (n - 1);
    const Matrix t = r.orthogonal(n) * (0.5 * Matrix::Identity(n, n) + 0.2 * r.matrix(n, n).cwiseAbs());
    SubspaceSplit s;
    try {
      s = makeSplit(t.topRows(a), t.bottomRows(n - a));
    } catch (const Error&) {
      continue;
    }
    const double tol = 1e-10 * s.conditionNumber();
    EXPECT_MAT_NEAR(s.active() * s.invActive(), Matrix::Identity(a, a), tol);
    EXPECT_MAT_NEAR(s.inactive() * s.invInactive(), Matrix::Identity(n - a, n - a), tol);
    EXPECT_MAT_NEAR(s.active() * s.invInactive(), Matrix::Zero(a, n - a), tol);
    EXPECT_MAT_NEAR(s.inactive() * s.invActive(), Matrix::Zero(n - a, a), tol);
    for (int k = 0; k < 100; ++k) {
      const Vector x = r.vector(n);
      const Vector back = s.invActive() * (s.active() * x) + s.invInactive() * (s.inactive() * x);
      EXPECT_LE((back - x).norm(), tol * x.norm());
    }
  }
}

TEST(InactiveGain, OrthonormalComplementWithIdentityCovIsZero) {
  Random r(5);
  const Matrix q = r.orthogonal(4);
  const auto s = makeSplit(q.topRows(2), q.bottomRows(2));
  const GaussianBelief b(Vector::Zero(4), Matrix::Identity(4, 4));
  EXPECT_MAT_NEAR(inactiveGain(b, s), Matrix::Zero(2, 2), 1e-14);
}

TEST(InactiveGain, TwoByTwo) {
  const GaussianBelief b(vec({0, 0}), (Matrix(2, 2) << 2, 1, 1, 2).finished());
  const auto s = makeSplit((Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished());
  EXPECT_MAT_NEAR(inactiveGain(b, s), test::scalar(0.5), 1e-15);
}

TEST(InactiveGain, MatchesDenseOracle) {
  Random r(6);
  const Matrix p = r.spd(3);
  const Matrix t = r.orthogonal(3) + 0.2 * r.matrix(3, 3);
  const auto s = makeSplit(t.topRows(2), t.bottomRows(1));
  const Matrix sa = s.active(), sb = s.inactive();
  const Matrix want = sb * p * sa.transpose() * (sa * p * sa.transpose()).inverse();
  EXPECT_MAT_NEAR(inactiveGain(GaussianBelief(Vector::Zero(3), p), s), want, 1e-10);
}

TEST(InactiveGain, TrivialSplitIsEmpty) {
  const auto g = inactiveGain(GaussianBelief(Vector::Zero(2), Matrix::Identity(2, 2)), trivialSplit(2));
  EXPECT_EQ(g.rows(), 0);
  EXPECT_EQ(g.cols(), 2);
}

TEST(InactiveGain, DegenerateActiveCov) {
  const GaussianBelief b(vec({0, 0}), (Matrix(2, 2) << 0, 0, 0, 1).finished());
  const auto s = makeSplit((Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished());
  EXPECT_ERROR_CODE(inactiveGain(b, s), ErrorCode::DegenerateActiveCov);
}

TEST(ConditionOnSub, IndependentBlocks) {
  const GaussianBelief b(vec({1, 2}), (Matrix(2, 2) << 2, 0, 0, 3).finished());
  const auto c = conditionOnSub(b, (Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished());
  EXPECT_MAT_NEAR(c.gain, test::scalar(0), 0.0);
  EXPECT_MAT_NEAR(c.cov, test::scalar(3), 1e-15);
  EXPECT_DOUBLE_EQ(c.meanAt(vec({10}))(0), 2.0);
}

TEST(ConditionOnSub, BivariateCorrelation) {
  const GaussianBelief b(vec({0, 0}), (Matrix(2, 2) << 1, 0.6, 0.6, 1).finished());
  const auto c = conditionOnSub(b, (Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished());
  EXPECT_NEAR(c.gain(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(c.cov(0, 0), 0.64, 1e-15);
  EXPECT_NEAR(c.meanAt(vec({2}))(0), 1.2, 1e-15);
}

TEST(ConditionOnSub, SelfConditioning) {
  Random r(7);
  const GaussianBelief b(r.vector(3), r.spd(3));
  const Matrix rows = r.matrix(2, 3);
  const auto c = conditionOnSub(b, rows, rows);
  EXPECT_MAT_NEAR(c.gain, Matrix::Identity(2, 2), 1e-10);
  EXPECT_MAT_NEAR(c.cov, Matrix::Zero(2, 2), 1e-10);
}

TEST(ConditionOnSubProperty, CovIsPsd) {
  Random r(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 2 + trial % 4;
    const GaussianBelief b(r.vector(n), r.spd(n, 0.01));
    const Matrix given = r.matrix(1 + trial % (n - 1), n), target = r.matrix(n - given.rows(), n);
    const auto c = conditionOnSub(b, given, target);
    EXPECT_TRUE(isPsd(c.cov, 1e-9)) << "trial " << trial;
  }
}
