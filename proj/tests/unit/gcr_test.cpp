#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "transgcr/gcr.hpp"

namespace transgcr {
namespace {

LabelMatrix labels(std::vector<int> y, int classes) { return LabelMatrix(std::move(y), classes); }

TEST(Types, CoefficientAndLabelValidation) {
  EXPECT_THROW(CoefficientMatrix(Matrix::Zero(3, 2), 2), InvalidArgument);
  EXPECT_THROW(CoefficientMatrix(Matrix::Zero(3, 1), 1), InvalidArgument);
  Matrix bad = Matrix::Zero(2, 1);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(CoefficientMatrix(bad, 2), InvalidArgument);
  EXPECT_THROW(labels({0, 3}, 3), InvalidArgument);
  EXPECT_EQ(labels({0, 2, 1}, 3).one_hot().row(1), (Eigen::RowVector3d(0, 0, 1)));
}

TEST(Types, DatasetValidate) {
  Dataset ds{Graph(3, {}), Matrix::Zero(3, 2), labels({0, 1, 0}, 2), Mask(3, true)};
  EXPECT_NO_THROW(ds.validate());
  ds.mask.pop_back();
  EXPECT_THROW(ds.validate(), InvalidArgument);
}

TEST(Probabilities, ZeroCoefficientsUniform) {
  Matrix z = testutil::normal_matrix(6, 3, 1);
  Matrix p = probabilities(z, CoefficientMatrix::zero(3, 4));
  EXPECT_TRUE(p.isApproxToConstant(0.25, 1e-15));
}

TEST(Probabilities, BinaryLogThree) {
  Matrix z(1, 1);
  z << 1.0;
  Matrix b(1, 1);
  b << std::log(3.0);
  Matrix p = probabilities(z, CoefficientMatrix(b, 2));
  EXPECT_NEAR(p(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.25, 1e-15);
}

TEST(Probabilities, HugeLogitsDoNotOverflow) {
  Matrix z(1, 1);
  z << 1.0;
  Matrix b(1, 2);
  b << 1000.0, 1000.0;
  Matrix p = probabilities(z, CoefficientMatrix(b, 3));
  ASSERT_TRUE(p.allFinite());
  EXPECT_NEAR(p(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(p(0, 1), 0.5, 1e-9);
  EXPECT_LT(p(0, 2), 1e-300);
}

TEST(Probabilities, RowsSumToOneAndMatchOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int classes = 2 + static_cast<int>(seed % 4);
    Matrix z = testutil::uniform_matrix(15, 4, 10.0, seed);
    Matrix b = testutil::uniform_matrix(4, classes - 1, 3.0, seed + 50);
    Matrix p = probabilities(z, CoefficientMatrix(b, classes));
    for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    EXPECT_LT((p - oracle::scalar_probabilities(z, b)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Probabilities, RejectsBadInput) {
  Matrix z = Matrix::Zero(2, 3);
  EXPECT_THROW(probabilities(z, CoefficientMatrix::zero(2, 2)), InvalidArgument);
  z(0, 0) = INFINITY;
  EXPECT_THROW(probabilities(z, CoefficientMatrix::zero(3, 2)), InvalidArgument);
}

TEST(Loss, ZeroCoefficientsIsNCLog2) {
  const int n = 7, classes = 3;
  Matrix z = testutil::normal_matrix(n, 2, 3);
  auto y = labels(testutil::random_labels(n, classes, 3), classes);
  EXPECT_NEAR(loss(z, y, Mask(n, true), CoefficientMatrix::zero(2, classes), 0.0),
              n * classes * std::log(2.0), 1e-12);
}

TEST(Loss, PenaltyIsLinear) {
  Matrix z = testutil::normal_matrix(5, 3, 8);
  auto y = labels({0, 1, 2, 0, 1}, 3);
  Matrix b = Matrix::Zero(3, 2);
  b(1, 0) = 2.5;
  CoefficientMatrix cb(b, 3);
  Mask m(5, true);
  EXPECT_NEAR(loss(z, y, m, cb, 1.0) - loss(z, y, m, cb, 0.0), 2.5, 1e-12);
  EXPECT_THROW(loss(z, y, m, cb, -1.0), InvalidArgument);
}

TEST(Loss, MatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Matrix z = testutil::uniform_matrix(8, 3, 2.0, seed);
    auto y = testutil::random_labels(8, 3, seed);
    auto m = testutil::random_mask(8, 0.7, seed);
    Matrix b = testutil::uniform_matrix(3, 2, 1.5, seed + 1);
    const double lambda = 0.3;
    EXPECT_NEAR(loss(z, labels(y, 3), m, CoefficientMatrix(b, 3), lambda),
                oracle::scalar_loss(z, y, m, b, 3, lambda), 1e-12);
  }
}

TEST(Loss, PenaltySeparatesExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix z = testutil::uniform_matrix(12, 4, 3.0, seed);
    auto y = labels(testutil::random_labels(12, 4, seed), 4);
    Mask m(12, true);
    CoefficientMatrix b(testutil::uniform_matrix(4, 3, 2.0, seed + 9), 4);
    const double lambda = 0.7;
    EXPECT_NEAR(loss(z, y, m, b, lambda) - loss(z, y, m, b, 0.0), lambda * b.l1_norm(), 1e-10);
  }
}

TEST(Loss, InvariantUnderNodePermutation) {
  Matrix z = testutil::uniform_matrix(20, 3, 2.0, 4);
  auto y = testutil::random_labels(20, 3, 4);
  auto m = testutil::random_mask(20, 0.6, 4);
  CoefficientMatrix b(testutil::uniform_matrix(3, 2, 1.0, 5), 3);
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  Matrix zp(20, 3);
  std::vector<int> yp(20);
  Mask mp(20);
  for (int i = 0; i < 20; ++i) {
    zp.row(i) = z.row(perm[i]);
    yp[i] = y[perm[i]];
    mp[i] = m[perm[i]];
  }
  EXPECT_NEAR(loss(z, labels(y, 3), m, b, 0.2), loss(zp, labels(yp, 3), mp, b, 0.2), 1e-10);
}

TEST(Gradient, BalancedLabelsGiveZero) {
  Matrix z = Matrix::Ones(4, 1);
  auto y = labels({0, 0, 1, 1}, 2);
  Matrix g = gradient(z, y, Mask(4, true), CoefficientMatrix::zero(1, 2));
  EXPECT_EQ(g(0, 0), 0.0);
}

TEST(Gradient, EmptyMaskIsZero) {
  Matrix z = testutil::normal_matrix(5, 3, 1);
  auto y = labels(testutil::random_labels(5, 3, 1), 3);
  CoefficientMatrix b(testutil::uniform_matrix(3, 2, 1.0, 2), 3);
  EXPECT_TRUE(gradient(z, y, Mask(5, false), b).isZero(0.0));
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int classes = 2 + static_cast<int>(seed % 3);
    Matrix z = testutil::uniform_matrix(10, 4, 10.0, seed);
    auto y = testutil::random_labels(10, classes, seed);
    auto m = testutil::random_mask(10, 0.8, seed);
    Matrix b = testutil::uniform_matrix(4, classes - 1, 0.3, seed + 3);
    Matrix g = gradient(z, labels(y, classes), m, CoefficientMatrix(b, classes));
    Matrix fd = oracle::fd_gradient(z, y, m, b, classes, 1e-5);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
  }
}

TEST(Predict, TiesGoToFirstClass) {
  Matrix z = testutil::normal_matrix(4, 2, 1);
  LabelMatrix p = predict(z, CoefficientMatrix::zero(2, 3));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(p[i], 0);
}

TEST(Predict, BinarySignRule) {
  Matrix z(2, 1);
  z << 1.0, -1.0;
  Matrix b(1, 1);
  b << 0.5;
  LabelMatrix p = predict(z, CoefficientMatrix(b, 2));
  EXPECT_EQ(p[0], 0);
  EXPECT_EQ(p[1], 1);
}

TEST(Predict, ArgmaxOfOracleProbabilities) {
  Matrix z = testutil::uniform_matrix(50, 3, 2.0, 7);
  Matrix b = testutil::uniform_matrix(3, 3, 1.0, 8);
  LabelMatrix p = predict(z, CoefficientMatrix(b, 4));
  Matrix ref = oracle::scalar_probabilities(z, b);
  for (Eigen::Index i = 0; i < 50; ++i) {
    Eigen::Index best;
    ref.row(i).maxCoeff(&best);
    EXPECT_EQ(p[static_cast<std::size_t>(i)], best);
  }
}

TEST(SampleLabels, UniformFrequencies) {
  const int n = 30000;
  Matrix z = Matrix::Ones(n, 1);
  LabelMatrix y = sample_labels(z, CoefficientMatrix::zero(1, 3), 11);
  std::vector<double> count(3, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) count[y[i]] += 1.0;
  const auto band = oracle::binomial_band(n, 1.0 / 3.0);
  for (double c : count) {
    EXPECT_GE(c, band.lo);
    EXPECT_LE(c, band.hi);
  }
}

TEST(SampleLabels, DegenerateAndReproducible) {
  Matrix z = Matrix::Ones(100, 1);
  Matrix b(1, 1);
  b << 1e6;
  LabelMatrix y = sample_labels(z, CoefficientMatrix(b, 2), 3);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 0);
  Matrix zr = testutil::normal_matrix(200, 2, 1);
  CoefficientMatrix br(testutil::uniform_matrix(2, 2, 1.0, 2), 3);
  EXPECT_EQ(sample_labels(zr, br, 5), sample_labels(zr, br, 5));
}

TEST(Stable, LogisticHelpers) {
  EXPECT_NEAR(log1p_exp(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(log1p_exp(800.0), 800.0);
  EXPECT_GT(log1p_exp(-800.0), -1.0);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

}  // namespace
}  // namespace transgcr
