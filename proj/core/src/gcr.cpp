#include "transgcr/gcr.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "transgcr/random.hpp"

namespace transgcr {

CoefficientMatrix::CoefficientMatrix(Matrix values, int num_classes)
    : values_(std::move(values)), num_classes_(num_classes) {
  if (num_classes_ < 2) throw InvalidArgument("coefficient matrix needs at least 2 classes");
  if (values_.cols() != num_classes_ - 1)
    throw InvalidArgument("coefficient matrix must have C-1 = " + std::to_string(num_classes_ - 1) +
                          " columns, got " + std::to_string(values_.cols()));
  if (!values_.allFinite()) throw InvalidArgument("coefficient matrix has non-finite entries");
}

CoefficientMatrix CoefficientMatrix::zero(Eigen::Index num_features, int num_classes) {
  return CoefficientMatrix(Matrix::Zero(num_features, std::max(num_classes - 1, 0)), num_classes);
}

std::size_t CoefficientMatrix::nonzeros() const {
  return static_cast<std::size_t>((values_.array() != 0.0).count());
}

LabelMatrix::LabelMatrix(std::vector<int> assignments, int num_classes)
    : assignments_(std::move(assignments)), num_classes_(num_classes) {
  if (num_classes_ < 2) throw InvalidArgument("label matrix needs at least 2 classes");
  for (std::size_t i = 0; i < assignments_.size(); ++i)
    if (assignments_[i] < 0 || assignments_[i] >= num_classes_)
      throw InvalidArgument("label of node " + std::to_string(i) + " out of range");
}

Matrix LabelMatrix::one_hot() const {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(size()), num_classes_);
  for (std::size_t i = 0; i < size(); ++i) y(static_cast<Eigen::Index>(i), assignments_[i]) = 1.0;
  return y;
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  if (features.rows() != n)
    throw InvalidArgument("dataset: feature rows (" + std::to_string(features.rows()) +
                          ") != node count (" + std::to_string(n) + ")");
  if (labels.size() != graph.num_nodes()) throw InvalidArgument("dataset: label count != node count");
  if (mask.size() != graph.num_nodes()) throw InvalidArgument("dataset: mask length != node count");
  if (!features.allFinite()) throw InvalidArgument("dataset: features must be finite");
}

double log1p_exp(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_shapes(const Matrix& z, const CoefficientMatrix& b, const char* where) {
  if (z.cols() != b.num_features())
    throw InvalidArgument(std::string(where) + ": features have " + std::to_string(z.cols()) +
                          " columns, coefficients have " + std::to_string(b.num_features()) +
                          " rows");
  if (!z.allFinite()) throw InvalidArgument(std::string(where) + ": non-finite features");
}

void check_labels(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                  const CoefficientMatrix& b, const char* where) {
  check_shapes(z, b, where);
  if (y.size() != static_cast<std::size_t>(z.rows()) || mask.size() != y.size())
    throw InvalidArgument(std::string(where) + ": labels/mask length does not match rows");
  if (y.num_classes() != b.num_classes())
    throw InvalidArgument(std::string(where) + ": label and coefficient class counts differ");
}

}  // namespace

Matrix probabilities(const Matrix& z, const CoefficientMatrix& b) {
  check_shapes(z, b, "probabilities");
  const Matrix logits = z * b.values();
  const int c_ref = b.num_classes() - 1;
  Matrix p(z.rows(), b.num_classes());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double top = 0.0;  // reference logit
    for (int c = 0; c < c_ref; ++c) top = std::max(top, logits(i, c));
    double denom = std::exp(-top);
    for (int c = 0; c < c_ref; ++c) denom += std::exp(logits(i, c) - top);
    for (int c = 0; c < c_ref; ++c) p(i, c) = std::exp(logits(i, c) - top) / denom;
    p(i, c_ref) = std::exp(-top) / denom;
  }
  return p;
}

double loss(const Matrix& z, const LabelMatrix& y, const Mask& mask, const CoefficientMatrix& b,
            double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("loss: lambda must be >= 0");
  check_labels(z, y, mask, b, "loss");
  const Matrix logits = z * b.values();
  const int c_ref = b.num_classes() - 1;
  double total = 0.0;
  std::size_t visible = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    ++visible;
    for (int c = 0; c < c_ref; ++c) {
      const double eta = logits(i, c);
      total -= y.indicator(static_cast<std::size_t>(i), c) * eta - log1p_exp(eta);
    }
  }
  total += static_cast<double>(visible) * std::log(2.0);
  return total + lambda * b.l1_norm();
}

Matrix gradient(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                const CoefficientMatrix& b) {
  check_labels(z, y, mask, b, "gradient");
  const Matrix logits = z * b.values();
  const int c_ref = b.num_classes() - 1;
  Matrix residual = Matrix::Zero(z.rows(), c_ref);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (int c = 0; c < c_ref; ++c)
      residual(i, c) = sigmoid(logits(i, c)) - y.indicator(static_cast<std::size_t>(i), c);
  }
  return z.transpose() * residual;
}

LabelMatrix predict(const Matrix& z, const CoefficientMatrix& b) {
  const Matrix p = probabilities(z, b);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < p.cols(); ++c)
      if (p(i, c) > p(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return LabelMatrix(std::move(out), b.num_classes());
}

LabelMatrix sample_labels(const Matrix& z, const CoefficientMatrix& b, std::uint64_t seed) {
  const Matrix p = probabilities(z, b);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  const int classes = b.num_classes();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double u = unit(rng);
    double cumulative = 0.0;
    int chosen = classes - 1;
    for (int c = 0; c < classes - 1; ++c) {
      cumulative += p(i, c);
      if (u < cumulative) {
        chosen = c;
        break;
      }
    }
    out[static_cast<std::size_t>(i)] = chosen;
  }
  return LabelMatrix(std::move(out), classes);
}

}  // namespace transgcr
