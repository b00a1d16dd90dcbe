#pragma once

#include <optional>
#include <vector>

#include "transgcr/gcr.hpp"
#include "transgcr/types.hpp"

namespace transgcr {

/// Which L1 term an offset fit penalises.
///   kDelta:   lambda * sum_c ||delta_c||_1
///   kShifted: lambda * sum_c ||offset_c + delta_c||_1
enum class PenaltyMode { kDelta, kShifted };

struct FitConfig {
  double lambda = 0.0;
  /// Convergence threshold on the largest absolute coefficient change in a sweep.
  double tol = 1e-6;
  /// Majorisation sweeps.
  int max_outer = 200;
  /// Coordinate cycles per sweep.
  int max_inner = 1;
  PenaltyMode penalty_mode = PenaltyMode::kDelta;
  /// After the first full cycle, cycle only over nonzero coordinates and
  /// re-check every coordinate before declaring convergence.
  bool active_set = true;

  void validate() const;
};

struct FitResult {
  CoefficientMatrix coefficients;
  /// Objective after each sweep.
  std::vector<double> objective_trace;
  bool converged = false;
  int sweeps_used = 0;
};

/// sign(x) * max(|x| - t, 0).
double soft_threshold(double x, double t);

/// L1-penalised fit of the per-class logistic objective by cyclic coordinate
/// descent on a quadratic majoriser with curvature 0.25 * sum_i Z_ij^2.
/// Classes are independent problems; they are swept in lockstep so the
/// objective trace is the total objective. Starts from zero unless a warm
/// start is given.
FitResult fit(const Matrix& z, const LabelMatrix& y, const Mask& mask, const FitConfig& config,
              const std::optional<CoefficientMatrix>& warm_start = std::nullopt);

/// Fits delta with coefficients parameterised as offset + delta; the returned
/// FitResult holds delta. config.penalty_mode selects the L1 term.
FitResult fit_offset(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                     const CoefficientMatrix& offset, const FitConfig& config);

/// Largest |g_jc| at beta = 0; any lambda >= this value yields beta-hat = 0.
double lambda_max(const Matrix& z, const LabelMatrix& y, const Mask& mask);

/// Worst violation of the L1 optimality conditions at delta for the offset
/// problem (offset may be zero):
///   |g| - lambda            where delta is at its penalty centre,
///   |g + lambda * sign(.)|  elsewhere.
/// Non-positive values at centre coordinates count as zero violation.
double kkt_violation(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                     const CoefficientMatrix& offset, const CoefficientMatrix& delta,
                     double lambda, PenaltyMode mode = PenaltyMode::kDelta);

}  // namespace transgcr
