#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "mbf/composition.hpp"
#include "test_util.hpp"

using namespace mbf;
using test::Random;
using test::scalar;
using test::vec;

namespace {

StateLayout layout4() { return {{{"p1", "m"}, {"v1", "m/s"}, {"p2", "m"}, {"v2", "m/s"}}}; }

SubmodelBinding select(std::initializer_list<std::pair<const char*, const char*>> states) {
  SubmodelBinding b;
  for (auto [n, u] : states) b.states.push_back({n, u, {}});
  return b;
}

double conditionNumber(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

TransitionModelD scalarWalk() { return {vec({0}), scalar(1), scalar(1), scalar(0.1)}; }

}  // namespace

TEST(UnitTable, DefaultsAndInverse) {
  const auto t = UnitTable::siDefaults();
  EXPECT_DOUBLE_EQ(*t.factor("rad", "deg"), 180.0 / std::numbers::pi);
  EXPECT_DOUBLE_EQ(*t.factor("deg", "rad"), std::numbers::pi / 180.0);
  EXPECT_DOUBLE_EQ(*t.factor("mm", "m"), 1e-3);
  EXPECT_DOUBLE_EQ(*t.factor("kg", "kg"), 1.0);
  EXPECT_FALSE(t.factor("m", "s").has_value());
  UnitTable u;
  EXPECT_ERROR_CODE(u.add("a", "b", 0.0), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(u.add("a", "b", -2.0), ErrorCode::InvalidArgument);
}

TEST(StateLayout, Validation) {
  EXPECT_NO_THROW(layout4().validate());
  EXPECT_EQ(layout4().indexOf("p2"), 2);
  EXPECT_FALSE(layout4().indexOf("q").has_value());
  StateLayout dup{{{"a", "m"}, {"a", "m"}}};
  EXPECT_ERROR_CODE(dup.validate(), ErrorCode::BindingErrors);
  StateLayout empty{{{"", "m"}}};
  EXPECT_ERROR_CODE(empty.validate(), ErrorCode::BindingErrors);
}

TEST(BuildProjection, SameNamesGiveSelectionRows) {
  const Matrix r = buildProjection(layout4(), select({{"p1", "m"}, {"v1", "m/s"}, {"p2", "m"}, {"v2", "m/s"}}),
                                   UnitTable::siDefaults());
  EXPECT_EQ(r, Matrix::Identity(4, 4));
  const Matrix s = buildProjection(layout4(), select({{"v2", "m/s"}, {"p1", "m"}}), UnitTable::siDefaults());
  EXPECT_EQ(s, (Matrix(2, 4) << 0, 0, 0, 1, 1, 0, 0, 0).finished());
}

TEST(BuildProjection, DegreesOverRadians) {
  const StateLayout l{{{"theta", "rad"}}};
  const Matrix r = buildProjection(l, select({{"theta", "deg"}}), UnitTable::siDefaults());
  EXPECT_DOUBLE_EQ(r(0, 0), 180.0 / std::numbers::pi);
}

TEST(BuildProjection, VelocityDifference) {
  SubmodelBinding b;
  b.states.push_back({"dv", "m/s", {{"v1", 1.0}, {"v2", -1.0}}});
  const Matrix r = buildProjection(layout4(), b, UnitTable::siDefaults());
  EXPECT_EQ(r, (Matrix(1, 4) << 0, 1, 0, -1).finished());
  SubmodelBinding mm;
  mm.states.push_back({"dv", "mm/s", {{"v1", 1.0}, {"v2", -1.0}}});
  EXPECT_MAT_NEAR(buildProjection(layout4(), mm, UnitTable::siDefaults()),
                  (Matrix(1, 4) << 0, 1000, 0, -1000).finished(), 1e-12);
}

TEST(BuildProjection, Errors) {
  EXPECT_ERROR_CODE(buildProjection(layout4(), select({{"q", "m"}}), UnitTable::siDefaults()), ErrorCode::UnknownState);
  EXPECT_ERROR_CODE(buildProjection(layout4(), select({{"p1", "s"}}), UnitTable::siDefaults()),
                    ErrorCode::IncompatibleUnits);
}

// Property: converting u -> v then v -> u recovers the original rows.
TEST(BuildProjection, UnitRoundTrip) {
  const auto units = UnitTable::siDefaults();
  const StateLayout rad{{{"a", "rad"}, {"b", "m"}}};
  const Matrix there = buildProjection(rad, select({{"a", "deg"}, {"b", "mm"}}), units);
  const StateLayout deg{{{"a", "deg"}, {"b", "mm"}}};
  const Matrix back = buildProjection(deg, select({{"a", "rad"}, {"b", "m"}}), units);
  EXPECT_MAT_NEAR(back * there, Matrix::Identity(2, 2), 1e-12);
}

TEST(ComplementBasis, Examples) {
  EXPECT_EQ(complementBasis((Matrix(1, 3) << 1, 0, 0).finished()),
            (Matrix(2, 3) << 0, 1, 0, 0, 0, 1).finished());
  const Matrix diag = (Matrix(1, 2) << 1, 1).finished() / std::sqrt(2.0);
  const Matrix c = complementBasis(diag);
  ASSERT_EQ(c.rows(), 1);
  EXPECT_TRUE(c == (Matrix(1, 2) << 1, 0).finished() || c == (Matrix(1, 2) << 0, 1).finished());
  Matrix stacked(2, 2);
  stacked << diag, c;
  EXPECT_LE(conditionNumber(stacked), 10.0);
  EXPECT_EQ(complementBasis(Matrix::Identity(3, 3)).rows(), 0);
  EXPECT_ERROR_CODE(complementBasis((Matrix(2, 3) << 1, 2, 3, 2, 4, 6).finished()), ErrorCode::RankDeficientActive);
}

TEST(ComplementBasis, AlwaysGivesValidSplit) {
  Random r(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 2 + t % 5;
    const Eigen::Index a = 1 + t % n;
    const Matrix active = r.matrix(a, n);
    const Matrix comp = complementBasis(active);
    EXPECT_EQ(comp.rows(), n - a);
    EXPECT_NO_THROW(makeSplit(active, comp));
  }
}

TEST(ComposeSystem, SingleFullStateModel) {
  const StateLayout l{{{"x", "m"}}};
  const auto sys = composeSystem(l, {{"walk", select({{"x", "m"}}), scalarWalk()}}, {}, UnitTable::siDefaults());
  EXPECT_EQ(sys.stateDim(), 1);
  const auto plan = sys.stepPlan(5);
  ASSERT_NE(plan.transition, nullptr);
  EXPECT_EQ(plan.output, nullptr);
  EXPECT_EQ(plan.transition->split.active(), Matrix::Identity(1, 1));
  EXPECT_EQ(*plan.transitionName, "walk");
}

// Two submodels on disjoint states alternate; the untouched pair stays put.
TEST(ComposeSystem, AlternatingSubmodelsLeaveOthersInvariant) {
  const TransitionModelD cv{vec({0, 0}), (Matrix(2, 2) << 1, 0.1, 0, 1).finished(), Matrix::Identity(2, 2),
                            0.01 * Matrix::Identity(2, 2)};
  const auto sys = composeSystem(layout4(),
                                 {{"first", select({{"p1", "m"}, {"v1", "m/s"}}), cv},
                                  {"second", select({{"p2", "m"}, {"v2", "m/s"}}), cv}},
                                 {}, UnitTable::siDefaults());
  Random r(2);
  GaussianBelief b(r.vector(4), r.spd(4));
  for (std::size_t k = 0; k < 10; ++k) {
    const auto plan = sys.stepPlan(k);
    EXPECT_EQ(*plan.transitionName, k % 2 == 0 ? "first" : "second");
    const auto next = step(b, plan.transition, nullptr, std::nullopt, StepConfig{}, k).updated;
    const std::vector<int> frozen = k % 2 == 0 ? std::vector<int>{2, 3} : std::vector<int>{0, 1};
    const Matrix rows = selectRows(Matrix(Matrix::Identity(4, 4)), std::span<const int>(frozen));
    EXPECT_MAT_NEAR(rows * next.mean(), rows * b.mean(), 1e-12);
    EXPECT_MAT_NEAR(rows * next.cov() * rows.transpose(), rows * b.cov() * rows.transpose(), 1e-12);
    b = next;
  }
}

TEST(ComposeSystem, AggregatesBindingErrors) {
  try {
    composeSystem(layout4(),
                  {{"a", select({{"nope", "m"}}), scalarWalk()}, {"b", select({{"p1", "s"}}), scalarWalk()}}, {},
                  UnitTable::siDefaults());
    FAIL() << "expected BindingErrors";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BindingErrors);
    EXPECT_NE(e.detail().find("nope"), std::string::npos);
  }
  EXPECT_ERROR_CODE(composeSystem(layout4(), {{"b", select({{"p1", "s"}}), scalarWalk()}}, {}, UnitTable::siDefaults()),
                    ErrorCode::IncompatibleUnits);
  // Binding dimension disagrees with the model.
  EXPECT_ERROR_CODE(composeSystem(layout4(), {{"c", select({{"p1", "m"}, {"v1", "m/s"}}), scalarWalk()}}, {},
                                  UnitTable::siDefaults()),
                    ErrorCode::DimensionMismatch);
}
