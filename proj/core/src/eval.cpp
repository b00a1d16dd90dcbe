#include "transgcr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace transgcr {

double coef_mse(const CoefficientMatrix& estimate, const CoefficientMatrix& truth) {
  if (estimate.num_classes() != truth.num_classes() ||
      estimate.num_features() != truth.num_features())
    throw InvalidArgument("coef_mse: shape mismatch");
  const double cells = static_cast<double>(truth.num_features()) * (truth.num_classes() - 1);
  if (cells == 0.0) return 0.0;
  return (estimate.values() - truth.values()).squaredNorm() / cells;
}

namespace {

struct Confusion {
  std::vector<double> tp, fp, fn;
};

Confusion confusion(const LabelMatrix& predicted, const LabelMatrix& truth,
                    std::span<const std::size_t> nodes) {
  if (nodes.empty()) throw InvalidArgument("f1: empty node set");
  if (predicted.num_classes() != truth.num_classes())
    throw InvalidArgument("f1: class counts differ");
  const auto classes = static_cast<std::size_t>(truth.num_classes());
  Confusion m{std::vector<double>(classes), std::vector<double>(classes),
              std::vector<double>(classes)};
  for (std::size_t i : nodes) {
    if (i >= truth.size() || i >= predicted.size())
      throw InvalidArgument("f1: node index out of range");
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    if (p == t) {
      m.tp[t] += 1;
    } else {
      m.fp[p] += 1;
      m.fn[t] += 1;
    }
  }
  return m;
}

double f1(double tp, double fp, double fn) {
  const double denom = 2 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2 * tp / denom;
}

}  // namespace

double micro_f1(const LabelMatrix& predicted, const LabelMatrix& truth,
                std::span<const std::size_t> nodes) {
  const Confusion m = confusion(predicted, truth, nodes);
  const double tp = std::accumulate(m.tp.begin(), m.tp.end(), 0.0);
  const double fp = std::accumulate(m.fp.begin(), m.fp.end(), 0.0);
  const double fn = std::accumulate(m.fn.begin(), m.fn.end(), 0.0);
  return f1(tp, fp, fn);
}

double macro_f1(const LabelMatrix& predicted, const LabelMatrix& truth,
                std::span<const std::size_t> nodes) {
  const Confusion m = confusion(predicted, truth, nodes);
  double sum = 0.0;
  for (std::size_t c = 0; c < m.tp.size(); ++c) sum += f1(m.tp[c], m.fp[c], m.fn[c]);
  return sum / static_cast<double>(m.tp.size());
}

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (bool b : labels) positives += b ? 1 : 0;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw InvalidArgument("auc: need at least one positive and one negative (degenerate labels)");

  // Midranks over the pooled scores.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i]) rank_sum += rank[i];
  const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

void ExperimentTable::add(double param_value, const std::string& method, int replicate,
                          const std::string& metric, double value) {
  if (!std::isfinite(value))
    throw InvalidArgument("experiment table: metric '" + metric + "' is not finite");
  records.push_back({scenario_param, param_value, method, replicate, metric, value});
}

std::vector<ExperimentTable::Summary> ExperimentTable::summarize() const {
  std::map<std::tuple<double, std::string, std::string>, std::vector<double>> groups;
  for (const MetricRecord& r : records) groups[{r.param_value, r.method, r.metric}].push_back(r.value);
  std::vector<Summary> out;
  for (const auto& [key, values] : groups) {
    Summary s;
    std::tie(s.param_value, s.method, s.metric) = key;
    s.count = values.size();
    double sum = 0.0;
    for (double x : values) sum += x;
    s.mean = sum / static_cast<double>(s.count);
    if (s.count > 1) {
      double ss = 0.0;
      for (double x : values) ss += (x - s.mean) * (x - s.mean);
      s.std_error = std::sqrt(ss / static_cast<double>(s.count - 1) / static_cast<double>(s.count));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace transgcr
