#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "transgcr/graph.hpp"
#include "transgcr/types.hpp"

namespace transgcr {

/// d x (C-1) coefficients. Column c holds the class-c coefficient vector;
/// the reference class C-1 (0-based) is pinned to zero and never stored.
class CoefficientMatrix {
 public:
  CoefficientMatrix() = default;
  CoefficientMatrix(Matrix values, int num_classes);

  static CoefficientMatrix zero(Eigen::Index num_features, int num_classes);

  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }
  int num_classes() const { return num_classes_; }
  Eigen::Index num_features() const { return values_.rows(); }

  /// Number of nonzero entries.
  std::size_t nonzeros() const;
  double l1_norm() const { return values_.cwiseAbs().sum(); }

  friend bool operator==(const CoefficientMatrix& a, const CoefficientMatrix& b) {
    return a.num_classes_ == b.num_classes_ && a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

 private:
  Matrix values_;
  int num_classes_ = 2;
};

/// One class index per node, 0-based (class C-1 is the reference class).
/// On disk classes are written 1-based.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::vector<int> assignments, int num_classes);

  std::size_t size() const { return assignments_.size(); }
  int num_classes() const { return num_classes_; }
  int operator[](std::size_t i) const { return assignments_[i]; }
  std::span<const int> assignments() const { return assignments_; }

  /// Y_ic as 0/1.
  double indicator(std::size_t i, int c) const { return assignments_[i] == c ? 1.0 : 0.0; }

  /// Dense n x C one-hot matrix.
  Matrix one_hot() const;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::vector<int> assignments_;
  int num_classes_ = 2;
};

/// One domain: graph, features, labels and label visibility.
struct Dataset {
  Graph graph;
  Matrix features;
  LabelMatrix labels;
  Mask mask;

  std::size_t num_nodes() const { return graph.num_nodes(); }
  Eigen::Index num_features() const { return features.cols(); }
  int num_classes() const { return labels.num_classes(); }

  /// Throws InvalidArgument when n disagrees across fields or features are
  /// not finite.
  void validate() const;
};

/// Numerically stable log(1 + e^x).
double log1p_exp(double x);
/// Logistic function, stable for large |x|.
double sigmoid(double x);

/// n x C matrix of class probabilities under the multinomial-logit model,
/// computed with log-sum-exp stabilisation. Rows sum to one.
Matrix probabilities(const Matrix& z, const CoefficientMatrix& b);

/// Penalised negative log-likelihood in its per-class logistic form:
///   -sum_{i in mask} sum_{c=1..C} [Y_ic z_i b_c - log(1 + exp(z_i b_c))]
///   + lambda * sum_c ||b_c||_1
/// with b_C = 0, so the reference class contributes |mask| * log 2.
double loss(const Matrix& z, const LabelMatrix& y, const Mask& mask, const CoefficientMatrix& b,
            double lambda);

/// Gradient of the smooth part of loss() with respect to the stored
/// coefficients: G_jc = -sum_{i in mask} Z_ij (Y_ic - sigmoid(z_i b_c)).
Matrix gradient(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                const CoefficientMatrix& b);

/// argmax_c P_ic, ties to the smallest class index.
LabelMatrix predict(const Matrix& z, const CoefficientMatrix& b);

/// Independent categorical draws from each node's probability row.
LabelMatrix sample_labels(const Matrix& z, const CoefficientMatrix& b, std::uint64_t seed);

}  // namespace transgcr
