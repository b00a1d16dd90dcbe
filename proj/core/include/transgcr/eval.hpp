#pragma once

#include <span>
#include <string>
#include <vector>

#include "transgcr/gcr.hpp"

namespace transgcr {

/// (1 / ((C-1) d)) * sum_c ||estimate_c - truth_c||^2.
double coef_mse(const CoefficientMatrix& estimate, const CoefficientMatrix& truth);

/// Pooled F1 over all classes; equals accuracy for single-label predictions.
double micro_f1(const LabelMatrix& predicted, const LabelMatrix& truth,
                std::span<const std::size_t> nodes);

/// Unweighted mean of per-class F1 = 2TP / (2TP + FP + FN) over all C
/// classes; a class with no support and no predictions scores 0.
double macro_f1(const LabelMatrix& predicted, const LabelMatrix& truth,
                std::span<const std::size_t> nodes);

/// Mann-Whitney AUC with ties counted one half; higher score = positive.
/// Throws InvalidArgument without at least one positive and one negative.
double auc(std::span<const double> scores, const std::vector<bool>& labels);

/// One metric observation from an experiment.
struct MetricRecord {
  std::string scenario_param;  // name of the swept parameter
  double param_value = 0.0;
  std::string method;
  int replicate = 0;
  std::string metric;
  double value = 0.0;
};

/// A cell that could not be evaluated.
struct CellFailure {
  double param_value = 0.0;
  std::string method;
  int replicate = 0;
  std::string reason;
};

struct ExperimentTable {
  std::string scenario_param;
  std::vector<MetricRecord> records;
  std::vector<CellFailure> failures;

  void add(double param_value, const std::string& method, int replicate,
           const std::string& metric, double value);

  struct Summary {
    double param_value = 0.0;
    std::string method;
    std::string metric;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
  };
  /// Mean and standard error per (param value, method, metric), sorted.
  std::vector<Summary> summarize() const;
};

}  // namespace transgcr
