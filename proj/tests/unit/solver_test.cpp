#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "transgcr/eval.hpp"
#include "transgcr/solver.hpp"

namespace transgcr {
namespace {

FitConfig tight(double lambda) {
  FitConfig c;
  c.lambda = lambda;
  c.tol = 1e-11;
  c.max_outer = 100000;
  return c;
}

std::vector<int> as_vector(const LabelMatrix& y) { return {y.assignments().begin(), y.assignments().end()}; }

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  for (double x : {-2.5, 0.0, 1e-300, 7.0}) EXPECT_EQ(soft_threshold(x, 0.0), x);
  EXPECT_THROW(soft_threshold(1.0, -0.1), InvalidArgument);
}

TEST(FitConfig, Validation) {
  FitConfig c;
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = FitConfig{};
  c.max_outer = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = FitConfig{};
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Fit, NoVisibleLabels) {
  auto in = testutil::model_instance(10, 3, 2, 1, 1.0, 1);
  EXPECT_THROW(fit(in.z, in.y, Mask(10, false), FitConfig{}), InvalidArgument);
}

TEST(Fit, LambdaMaxGivesExactZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = testutil::model_instance(60, 10, 2 + seed % 3, 3, 1.0, seed);
    const double lmax = lambda_max(in.z, in.y, in.mask);
    const double ref = gradient(in.z, in.y, in.mask, CoefficientMatrix::zero(10, in.y.num_classes()))
                           .cwiseAbs()
                           .maxCoeff();
    EXPECT_NEAR(lmax, ref, 1e-12 * ref);
    FitConfig c;
    c.lambda = lmax;
    EXPECT_EQ(fit(in.z, in.y, in.mask, c).coefficients.nonzeros(), 0u);
    c.lambda = 0.9 * lmax;
    EXPECT_GT(fit(in.z, in.y, in.mask, c).coefficients.nonzeros(), 0u);
  }
}

TEST(Fit, MatchesProximalGradientOracle) {
  auto in = testutil::model_instance(60, 10, 2, 3, 1.0, 5);
  const double lambda = 0.1;
  FitResult r = fit(in.z, in.y, in.mask, tight(lambda));
  ASSERT_TRUE(r.converged);
  const Matrix zero = Matrix::Zero(10, 1);
  auto ref = oracle::prox_gradient(in.z, as_vector(in.y), in.mask, zero, zero, 2, lambda, 20000);
  const double obj = loss(in.z, in.y, in.mask, r.coefficients, lambda);
  EXPECT_LE(std::abs(obj - ref.objective), 1e-6 * std::abs(ref.objective));
  EXPECT_NEAR(r.objective_trace.back(), obj, 1e-9 * std::abs(obj));
}

TEST(Fit, KktAtConvergence) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = testutil::model_instance(60, 10, 3, 3, 0.8, seed + 20);
    for (double lambda : {0.05, 0.5, 3.0}) {
      FitResult r = fit(in.z, in.y, in.mask, tight(lambda));
      ASSERT_TRUE(r.converged);
      const Matrix g = gradient(in.z, in.y, in.mask, r.coefficients);
      const Matrix& b = r.coefficients.values();
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        if (b(k) == 0.0)
          EXPECT_LE(std::abs(g(k)), lambda + 1e-5);
        else
          EXPECT_LE(std::abs(g(k) + lambda * (b(k) > 0 ? 1.0 : -1.0)), 1e-5);
      }
      auto zero = CoefficientMatrix::zero(10, 3);
      EXPECT_LE(kkt_violation(in.z, in.y, in.mask, zero, r.coefficients, lambda), 1e-5);
    }
  }
}

TEST(Fit, ObjectiveTraceIsMonotone) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = testutil::model_instance(80, 15, 3, 4, 1.0, seed + 40);
    for (bool active : {true, false}) {
      FitConfig c = tight(0.2);
      c.active_set = active;
      c.max_inner = 1 + static_cast<int>(seed % 3);
      FitResult r = fit(in.z, in.y, in.mask, c);
      for (std::size_t t = 1; t < r.objective_trace.size(); ++t)
        EXPECT_LE(r.objective_trace[t],
                  r.objective_trace[t - 1] + 1e-10 * std::max(1.0, std::abs(r.objective_trace[t - 1])));
    }
  }
}

TEST(Fit, ActiveSetReachesSameOptimum) {
  auto in = testutil::model_instance(100, 30, 3, 5, 1.0, 77);
  FitConfig a = tight(0.5), b = tight(0.5);
  b.active_set = false;
  Matrix x = fit(in.z, in.y, in.mask, a).coefficients.values();
  Matrix y = fit(in.z, in.y, in.mask, b).coefficients.values();
  EXPECT_LT((x - y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fit, Deterministic) {
  auto in = testutil::model_instance(80, 12, 3, 3, 1.0, 9);
  FitConfig c;
  c.lambda = 0.3;
  FitResult a = fit(in.z, in.y, in.mask, c), b = fit(in.z, in.y, in.mask, c);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_EQ(a.sweeps_used, b.sweeps_used);
}

TEST(Fit, ClassesSeparate) {
  auto in = testutil::model_instance(90, 8, 4, 3, 1.0, 13);
  FitConfig c = tight(0.4);
  Matrix joint = fit(in.z, in.y, in.mask, c).coefficients.values();
  for (int cls = 0; cls < 3; ++cls) {
    std::vector<int> yb(90);
    for (std::size_t i = 0; i < 90; ++i) yb[i] = in.y[i] == cls ? 0 : 1;
    Matrix single = fit(in.z, LabelMatrix(yb, 2), in.mask, c).coefficients.values();
    EXPECT_EQ(Vector(single.col(0)), Vector(joint.col(cls)));
  }
}

TEST(Fit, ZeroColumnStaysZero) {
  auto in = testutil::model_instance(50, 5, 2, 2, 1.0, 3);
  in.z.col(4).setZero();
  FitResult r = fit(in.z, in.y, in.mask, tight(0.0));
  EXPECT_EQ(r.coefficients.values()(4, 0), 0.0);
}

TEST(Fit, RecoversSupportOnOracleGrid) {
  auto in = testutil::model_instance(400, 20, 2, 5, 1.5, 21);
  // oracle picks the grid lambda closest to the truth
  double best_err = INFINITY;
  CoefficientMatrix best;
  for (double lambda : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    FitConfig c;
    c.lambda = lambda;
    CoefficientMatrix b = fit(in.z, in.y, in.mask, c).coefficients;
    const double err = coef_mse(b, in.truth);
    if (err < best_err) {
      best_err = err;
      best = b;
    }
  }
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NE(best.values()(j, 0), 0.0);
}

TEST(FitOffset, ZeroOffsetEqualsFit) {
  auto in = testutil::model_instance(70, 9, 3, 3, 1.0, 31);
  FitConfig c;
  c.lambda = 0.3;
  FitResult a = fit(in.z, in.y, in.mask, c);
  FitResult b = fit_offset(in.z, in.y, in.mask, CoefficientMatrix::zero(9, 3), c);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(FitOffset, HugeLambdaDeltaModeKeepsOffset) {
  auto in = testutil::model_instance(70, 6, 3, 3, 1.0, 32);
  CoefficientMatrix off(testutil::uniform_matrix(6, 2, 1.0, 5), 3);
  FitConfig c;
  c.lambda = 1e8;
  FitResult r = fit_offset(in.z, in.y, in.mask, off, c);
  EXPECT_EQ(r.coefficients.nonzeros(), 0u);
}

TEST(FitOffset, HugeLambdaShiftedModeCancelsOffset) {
  auto in = testutil::model_instance(40, 2, 2, 2, 1.0, 33);
  Matrix o(2, 1);
  o << 0.7, -1.2;
  CoefficientMatrix off(o, 2);
  FitConfig c = tight(1e6);
  c.penalty_mode = PenaltyMode::kShifted;
  FitResult r = fit_offset(in.z, in.y, in.mask, off, c);
  EXPECT_EQ(r.coefficients.values(), -o);
  // oracle on the same two-feature problem
  auto ref = oracle::prox_gradient(in.z, as_vector(in.y), in.mask, o, o, 2, 1e6, 200);
  EXPECT_LT((ref.delta + o).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitOffset, BothModesMatchOracle) {
  auto in = testutil::model_instance(60, 10, 2, 3, 1.0, 34);
  Matrix o = testutil::uniform_matrix(10, 1, 0.5, 8);
  CoefficientMatrix off(o, 2);
  for (auto mode : {PenaltyMode::kDelta, PenaltyMode::kShifted}) {
    FitConfig c = tight(0.2);
    c.penalty_mode = mode;
    FitResult r = fit_offset(in.z, in.y, in.mask, off, c);
    ASSERT_TRUE(r.converged);
    const Matrix center = mode == PenaltyMode::kShifted ? o : Matrix(Matrix::Zero(10, 1));
    auto ref = oracle::prox_gradient(in.z, as_vector(in.y), in.mask, o, center, 2, 0.2, 20000);
    EXPECT_LE(std::abs(r.objective_trace.back() - ref.objective), 1e-6 * std::abs(ref.objective));
    EXPECT_LE(kkt_violation(in.z, in.y, in.mask, off, r.coefficients, 0.2, mode), 1e-5);
  }
}

TEST(FitOffset, ShapeMismatch) {
  auto in = testutil::model_instance(20, 4, 3, 2, 1.0, 35);
  EXPECT_THROW(fit_offset(in.z, in.y, in.mask, CoefficientMatrix::zero(3, 3), FitConfig{}),
               InvalidArgument);
}

TEST(Fit, WarmStartReachesSameOptimum) {
  auto in = testutil::model_instance(80, 10, 3, 3, 1.0, 36);
  FitConfig c = tight(0.3);
  Matrix cold = fit(in.z, in.y, in.mask, c).coefficients.values();
  CoefficientMatrix start(testutil::uniform_matrix(10, 2, 1.0, 3), 3);
  Matrix warm = fit(in.z, in.y, in.mask, c, start).coefficients.values();
  EXPECT_LT((cold - warm).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace
}  // namespace transgcr
