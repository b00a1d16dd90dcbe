#pragma once

#include <span>
#include <vector>

#include "transgcr/gcr.hpp"
#include "transgcr/graph.hpp"
#include "transgcr/solver.hpp"

namespace transgcr {

/// Several domains stacked row-wise into one sample. The combined graph is
/// the disjoint union of the block graphs, so its normalised adjacency is
/// block-diagonal.
struct PooledDataset {
  std::vector<Dataset> blocks;
  /// Starting row of each block in `combined`.
  std::vector<std::size_t> offsets;
  Dataset combined;

  std::size_t total_nodes() const { return combined.num_nodes(); }
};

/// Throws InvalidArgument on an empty list or mismatched d / C.
PooledDataset pool_sources(std::span<const Dataset> datasets);

/// Labels, mask and propagated features of one domain; the unit both
/// estimation steps work on.
struct PropagatedDomain {
  Matrix z;
  LabelMatrix labels;
  Mask mask;
};

PropagatedDomain propagate_domain(const Dataset& d, int hops);

/// Row-wise concatenation. Equal, element for element, to propagating the
/// pooled dataset, since the pooled operator is block-diagonal.
PropagatedDomain stack_domains(std::span<const PropagatedDomain> domains);

struct TransferConfig {
  int hops = 1;
  double lambda_beta = 0.0;
  double lambda_delta = 0.0;
  PenaltyMode penalty_mode = PenaltyMode::kDelta;
  /// Pool the target with the sources when estimating the source coefficients.
  bool include_target_in_pool = false;
  /// Tolerances and caps shared by both fits; its lambda and penalty_mode are
  /// overridden by the fields above.
  FitConfig solver;
};

struct TransferResult {
  CoefficientMatrix beta_source;
  CoefficientMatrix delta;
  /// beta_source + delta, element-wise.
  CoefficientMatrix beta_target;
  TransferConfig config;
  FitResult source_fit;
  FitResult shift_fit;
};

/// Two-step transfer estimator:
///   1. normalise every adjacency;
///   2. pool the sources (and the target when requested);
///   3. beta_source = fit on the pooled propagated features with lambda_beta;
///   4. delta = fit_offset on the target with offset beta_source, lambda_delta;
///   5. beta_target = beta_source + delta.
/// Failures are rethrown naming the step: bad inputs stay InvalidArgument,
/// anything else becomes ComputationError.
TransferResult trans_gcr(const Dataset& target, std::span<const Dataset> sources,
                         const TransferConfig& config);

/// Steps 3-5 on already-propagated domains. `pooled` is the stacked source
/// sample (including the target if that is wanted).
TransferResult trans_gcr_propagated(const PropagatedDomain& target,
                                    const PropagatedDomain& pooled,
                                    const TransferConfig& config);

/// Step 4-5 only, for callers that already hold the source estimate.
TransferResult estimate_shift(const PropagatedDomain& target, const FitResult& source_fit,
                              const TransferConfig& config);

/// Naive pooling baseline: one fit on target + all sources stacked together.
CoefficientMatrix naive_tl(const Dataset& target, std::span<const Dataset> sources, int hops,
                           double lambda, const FitConfig& solver = {});

}  // namespace transgcr
