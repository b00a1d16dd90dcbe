#include "transgcr/transfer.hpp"

#include <string>

namespace transgcr {

PooledDataset pool_sources(std::span<const Dataset> datasets) {
  if (datasets.empty()) throw InvalidArgument("pool_sources: empty dataset list");
  const Eigen::Index d = datasets.front().num_features();
  const int classes = datasets.front().num_classes();
  std::size_t total = 0;
  for (const Dataset& ds : datasets) {
    ds.validate();
    if (ds.num_features() != d) throw InvalidArgument("pool_sources: feature dimensions differ");
    if (ds.num_classes() != classes) throw InvalidArgument("pool_sources: class counts differ");
    total += ds.num_nodes();
  }

  PooledDataset pooled;
  pooled.blocks.assign(datasets.begin(), datasets.end());
  std::vector<Graph> graphs;
  graphs.reserve(datasets.size());
  Matrix features(static_cast<Eigen::Index>(total), d);
  std::vector<int> labels;
  labels.reserve(total);
  Mask mask;
  mask.reserve(total);
  std::size_t offset = 0;
  for (const Dataset& ds : datasets) {
    pooled.offsets.push_back(offset);
    graphs.push_back(ds.graph);
    features.middleRows(static_cast<Eigen::Index>(offset), ds.features.rows()) = ds.features;
    labels.insert(labels.end(), ds.labels.assignments().begin(), ds.labels.assignments().end());
    mask.insert(mask.end(), ds.mask.begin(), ds.mask.end());
    offset += ds.num_nodes();
  }
  pooled.combined = Dataset{Graph::disjoint_union(graphs), std::move(features),
                            LabelMatrix(std::move(labels), classes), std::move(mask)};
  return pooled;
}

PropagatedDomain propagate_domain(const Dataset& d, int hops) {
  d.validate();
  return {propagate(normalize_adjacency(d.graph), d.features, hops).values, d.labels, d.mask};
}

PropagatedDomain stack_domains(std::span<const PropagatedDomain> domains) {
  if (domains.empty()) throw InvalidArgument("stack_domains: empty list");
  Eigen::Index rows = 0;
  const Eigen::Index cols = domains.front().z.cols();
  const int classes = domains.front().labels.num_classes();
  for (const auto& dom : domains) {
    if (dom.z.cols() != cols || dom.labels.num_classes() != classes)
      throw InvalidArgument("stack_domains: mismatched feature dimension or class count");
    rows += dom.z.rows();
  }
  PropagatedDomain out;
  out.z.resize(rows, cols);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows));
  Eigen::Index at = 0;
  for (const auto& dom : domains) {
    out.z.middleRows(at, dom.z.rows()) = dom.z;
    at += dom.z.rows();
    labels.insert(labels.end(), dom.labels.assignments().begin(), dom.labels.assignments().end());
    out.mask.insert(out.mask.end(), dom.mask.begin(), dom.mask.end());
  }
  out.labels = LabelMatrix(std::move(labels), classes);
  return out;
}

namespace {

template <typename F>
auto with_step(const char* step, F&& body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("trans_gcr ") + step + ": " + e.what());
  } catch (const std::exception& e) {
    throw ComputationError(std::string("trans_gcr ") + step + ": " + e.what());
  }
}

void check_config(const TransferConfig& config) {
  if (config.hops < 0) throw InvalidArgument("trans_gcr: hops must be >= 0");
  if (!(config.lambda_beta >= 0.0) || !(config.lambda_delta >= 0.0))
    throw InvalidArgument("trans_gcr: penalties must be >= 0");
}

}  // namespace

TransferResult estimate_shift(const PropagatedDomain& target, const FitResult& source_fit,
                              const TransferConfig& config) {
  FitConfig shift_config = config.solver;
  shift_config.lambda = config.lambda_delta;
  shift_config.penalty_mode = config.penalty_mode;
  TransferResult result;
  result.config = config;
  result.source_fit = source_fit;
  result.beta_source = source_fit.coefficients;
  result.shift_fit = with_step("step 4 (domain shift estimation)", [&] {
    return fit_offset(target.z, target.labels, target.mask, result.beta_source, shift_config);
  });
  result.delta = result.shift_fit.coefficients;
  result.beta_target = CoefficientMatrix(result.beta_source.values() + result.delta.values(),
                                         result.beta_source.num_classes());
  return result;
}

TransferResult trans_gcr_propagated(const PropagatedDomain& target,
                                    const PropagatedDomain& pooled,
                                    const TransferConfig& config) {
  check_config(config);
  if (count_visible(target.mask) == 0)
    throw InvalidArgument("trans_gcr: target has no visible labels");
  FitConfig source_config = config.solver;
  source_config.lambda = config.lambda_beta;
  source_config.penalty_mode = PenaltyMode::kDelta;
  const FitResult source_fit = with_step("step 3 (source estimation)", [&] {
    return fit(pooled.z, pooled.labels, pooled.mask, source_config);
  });
  return estimate_shift(target, source_fit, config);
}

TransferResult trans_gcr(const Dataset& target, std::span<const Dataset> sources,
                         const TransferConfig& config) {
  check_config(config);
  target.validate();
  if (sources.empty() && !config.include_target_in_pool)
    throw InvalidArgument("trans_gcr: no source datasets and target not pooled");

  std::vector<Dataset> pool(sources.begin(), sources.end());
  if (config.include_target_in_pool) pool.push_back(target);
  const PooledDataset pooled = with_step("step 2 (pooling)", [&] { return pool_sources(pool); });

  const PropagatedDomain target_domain =
      with_step("step 1 (propagation)", [&] { return propagate_domain(target, config.hops); });
  const PropagatedDomain pooled_domain = with_step(
      "step 1 (propagation)", [&] { return propagate_domain(pooled.combined, config.hops); });
  return trans_gcr_propagated(target_domain, pooled_domain, config);
}

CoefficientMatrix naive_tl(const Dataset& target, std::span<const Dataset> sources, int hops,
                           double lambda, const FitConfig& solver) {
  std::vector<Dataset> all;
  all.reserve(sources.size() + 1);
  all.push_back(target);
  all.insert(all.end(), sources.begin(), sources.end());
  const PooledDataset pooled = pool_sources(all);
  const PropagatedDomain domain = propagate_domain(pooled.combined, hops);
  FitConfig config = solver;
  config.lambda = lambda;
  config.penalty_mode = PenaltyMode::kDelta;
  return fit(domain.z, domain.labels, domain.mask, config).coefficients;
}

}  // namespace transgcr
