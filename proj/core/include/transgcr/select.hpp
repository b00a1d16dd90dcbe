#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "transgcr/gcr.hpp"
#include "transgcr/transfer.hpp"

namespace transgcr {

/// V disjoint folds covering {0..n-1}; sizes differ by at most one. Each
/// fold's indices are sorted.
struct FoldPartition {
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;
};

/// Uniform random partition; requires 2 <= v <= n.
FoldPartition partition_folds(std::size_t n, std::size_t v, std::uint64_t seed);

/// Probabilities are clamped to [1e-12, 1 - 1e-12] before taking logs.
inline constexpr double kProbabilityClamp = 1e-12;

/// Held-out negative log-likelihood over `test_nodes`:
///   -sum_i sum_c [Y_ic log P_ic + (1 - Y_ic) log(1 - P_ic)].
/// Features are propagated over the whole target graph.
double held_out_nll(const Dataset& target, const CoefficientMatrix& beta,
                    std::span<const std::size_t> test_nodes, int hops);

/// Same, on features that are already propagated.
double held_out_nll(const Matrix& z, const LabelMatrix& labels, const CoefficientMatrix& beta,
                    std::span<const std::size_t> test_nodes);

struct DetectionConfig {
  std::size_t folds = 3;
  std::uint64_t seed = 0;
  TransferConfig transfer;
};

struct TransferabilityReport {
  /// scores[k] = mean over folds of fold_scores[k][v].
  std::vector<double> scores;
  std::vector<std::vector<double>> fold_scores;
  /// Source indices sorted by score, ties to the smaller index.
  std::vector<std::size_t> ranking;
  /// Filled by select_sources; empty from transferability_scores.
  std::vector<std::size_t> selected;
};

/// Cross-validated transferability score of every source. For each source k
/// and fold v the two-step estimator runs with source k alone and the target
/// labels of fold v hidden; the fold score is the held-out NLL on fold v.
/// Target labels must all be visible on entry. `threads` = 0 uses the
/// hardware concurrency; results do not depend on it.
TransferabilityReport transferability_scores(const Dataset& target,
                                             std::span<const Dataset> sources,
                                             const DetectionConfig& config,
                                             unsigned threads = 1);

/// Indices of the l smallest scores in ascending score order, ties to the
/// smaller index. l larger than the number of scores returns all of them.
std::vector<std::size_t> select_sources(std::span<const double> scores, std::size_t l);

struct HyperparamCell {
  int hops = 1;
  double lambda = 0.0;
  double mean_nll = 0.0;
  std::vector<double> fold_nll;
};

struct CvResult {
  int best_hops = 1;
  double best_lambda = 0.0;
  std::vector<HyperparamCell> table;
};

/// V-fold cross-validation of (hops, lambda) on the dataset's visible labels.
/// Within each hop count lambdas are visited in decreasing order with warm
/// starts. Best cell: smallest mean NLL, ties to smaller hops then smaller
/// lambda. The table is returned in grid order.
CvResult cv_hyperparams(const Dataset& data, std::span<const std::pair<int, double>> grid,
                        std::size_t v, std::uint64_t seed, const FitConfig& solver = {});

}  // namespace transgcr
