#include "transgcr/select.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "transgcr/parallel.hpp"
#include "transgcr/random.hpp"

namespace transgcr {

FoldPartition partition_folds(std::size_t n, std::size_t v, std::uint64_t seed) {
  if (v < 2 || v > n)
    throw InvalidArgument("partition_folds: need 2 <= v <= n (v=" + std::to_string(v) +
                          ", n=" + std::to_string(n) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPartition part;
  part.seed = seed;
  part.folds.resize(v);
  for (std::size_t i = 0; i < n; ++i) part.folds[i % v].push_back(order[i]);
  for (auto& fold : part.folds) std::sort(fold.begin(), fold.end());
  return part;
}

double held_out_nll(const Matrix& z, const LabelMatrix& labels, const CoefficientMatrix& beta,
                    std::span<const std::size_t> test_nodes) {
  const Matrix p = probabilities(z, beta);
  double total = 0.0;
  for (std::size_t i : test_nodes) {
    if (i >= labels.size()) throw InvalidArgument("held_out_nll: test node out of range");
    for (int c = 0; c < beta.num_classes(); ++c) {
      const double pc = std::clamp(p(static_cast<Eigen::Index>(i), c), kProbabilityClamp,
                                   1.0 - kProbabilityClamp);
      total -= labels[i] == c ? std::log(pc) : std::log1p(-pc);
    }
  }
  return total;
}

double held_out_nll(const Dataset& target, const CoefficientMatrix& beta,
                    std::span<const std::size_t> test_nodes, int hops) {
  target.validate();
  const Matrix z = propagate(normalize_adjacency(target.graph), target.features, hops).values;
  return held_out_nll(z, target.labels, beta, test_nodes);
}

namespace {

Mask training_mask(const Mask& base, std::span<const std::size_t> held_out) {
  Mask m = base;
  for (std::size_t i : held_out) m[i] = false;
  return m;
}

}  // namespace

TransferabilityReport transferability_scores(const Dataset& target,
                                             std::span<const Dataset> sources,
                                             const DetectionConfig& config, unsigned threads) {
  target.validate();
  if (count_visible(target.mask) != target.num_nodes())
    throw InvalidArgument("transferability_scores: target labels must all be visible");
  const std::size_t n0 = target.num_nodes();
  const FoldPartition part = partition_folds(n0, config.folds, config.seed);
  const int hops = config.transfer.hops;

  const PropagatedDomain target_domain = propagate_domain(target, hops);
  std::vector<PropagatedDomain> fold_targets;
  for (const auto& fold : part.folds) {
    PropagatedDomain dom{target_domain.z, target_domain.labels,
                         training_mask(target_domain.mask, fold)};
    if (count_visible(dom.mask) == 0)
      throw ComputationError("transferability_scores: a fold leaves no training labels");
    fold_targets.push_back(std::move(dom));
  }

  TransferabilityReport report;
  report.scores.assign(sources.size(), 0.0);
  report.fold_scores.assign(sources.size(), std::vector<double>(part.folds.size(), 0.0));

  parallel_for(sources.size(), threads, [&](std::size_t k) {
    const PropagatedDomain source = propagate_domain(sources[k], hops);
    std::optional<FitResult> shared_source_fit;
    if (!config.transfer.include_target_in_pool) {
      // The source estimate does not see the target, so it is the same for
      // every fold.
      FitConfig source_config = config.transfer.solver;
      source_config.lambda = config.transfer.lambda_beta;
      source_config.penalty_mode = PenaltyMode::kDelta;
      shared_source_fit = fit(source.z, source.labels, source.mask, source_config);
    }
    for (std::size_t v = 0; v < part.folds.size(); ++v) {
      TransferResult tr;
      if (shared_source_fit) {
        tr = estimate_shift(fold_targets[v], *shared_source_fit, config.transfer);
      } else {
        const PropagatedDomain parts[] = {source, fold_targets[v]};
        tr = trans_gcr_propagated(fold_targets[v], stack_domains(parts), config.transfer);
      }
      report.fold_scores[k][v] =
          held_out_nll(target_domain.z, target_domain.labels, tr.beta_target, part.folds[v]);
    }
    double sum = 0.0;
    for (double s : report.fold_scores[k]) sum += s;
    report.scores[k] = sum / static_cast<double>(part.folds.size());
  });

  report.ranking = select_sources(report.scores, report.scores.size());
  return report;
}

std::vector<std::size_t> select_sources(std::span<const double> scores, std::size_t l) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  if (l < order.size()) order.resize(l);
  return order;
}

CvResult cv_hyperparams(const Dataset& data, std::span<const std::pair<int, double>> grid,
                        std::size_t v, std::uint64_t seed, const FitConfig& solver) {
  if (grid.empty()) throw InvalidArgument("cv_hyperparams: empty grid");
  data.validate();
  const std::vector<std::size_t> visible = visible_indices(data.mask);
  const FoldPartition part = partition_folds(visible.size(), v, seed);
  std::vector<std::vector<std::size_t>> folds;
  for (const auto& fold : part.folds) {
    std::vector<std::size_t> nodes;
    for (std::size_t pos : fold) nodes.push_back(visible[pos]);
    folds.push_back(std::move(nodes));
  }

  CvResult result;
  result.table.resize(grid.size());

  // Group grid cells by hop count; within a group, visit lambdas from large to
  // small so each fit can warm-start from the previous one.
  std::map<int, std::vector<std::size_t>> by_hops;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g].first < 0 || !(grid[g].second >= 0.0))
      throw InvalidArgument("cv_hyperparams: invalid grid cell");
    by_hops[grid[g].first].push_back(g);
  }

  for (auto& [hops, cells] : by_hops) {
    std::stable_sort(cells.begin(), cells.end(),
                     [&](std::size_t a, std::size_t b) { return grid[a].second > grid[b].second; });
    const Matrix z = propagate(normalize_adjacency(data.graph), data.features, hops).values;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const Mask train = training_mask(data.mask, folds[f]);
      std::optional<CoefficientMatrix> warm;
      for (std::size_t g : cells) {
        FitConfig config = solver;
        config.lambda = grid[g].second;
        config.penalty_mode = PenaltyMode::kDelta;
        FitResult fr = fit(z, data.labels, train, config, warm);
        const double nll = held_out_nll(z, data.labels, fr.coefficients, folds[f]);
        HyperparamCell& cell = result.table[g];
        cell.hops = hops;
        cell.lambda = grid[g].second;
        cell.fold_nll.resize(folds.size());
        cell.fold_nll[f] = nll;
        warm = std::move(fr.coefficients);
      }
    }
  }

  for (HyperparamCell& cell : result.table) {
    double sum = 0.0;
    for (double x : cell.fold_nll) sum += x;
    cell.mean_nll = sum / static_cast<double>(cell.fold_nll.size());
  }
  const HyperparamCell* best = &result.table.front();
  for (const HyperparamCell& cell : result.table) {
    const auto key = [](const HyperparamCell& c) { return std::tuple(c.mean_nll, c.hops, c.lambda); };
    if (key(cell) < key(*best)) best = &cell;
  }
  result.best_hops = best->hops;
  result.best_lambda = best->lambda;
  return result;
}

}  // namespace transgcr
