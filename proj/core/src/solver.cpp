#include "transgcr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace transgcr {

void FitConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("fit: lambda must be finite and >= 0");
  if (!(tol > 0.0)) throw InvalidArgument("fit: tol must be > 0");
  if (max_outer < 1 || max_inner < 1) throw InvalidArgument("fit: iteration caps must be >= 1");
}

double soft_threshold(double x, double t) {
  if (t < 0.0) throw InvalidArgument("soft_threshold: threshold must be >= 0");
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

namespace {

// One column of the per-class problem restricted to the visible rows.
struct ClassProblem {
  Vector y;       // 0/1 response for this class
  Vector center;  // coordinate where the L1 term vanishes
  Vector delta;
  Vector eta;       // current logits
  Vector residual;  // sigmoid(eta) - y
  bool converged = false;
  bool next_full = true;
};

class CoordinateDescent {
 public:
  CoordinateDescent(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                    const CoefficientMatrix& offset, const CoefficientMatrix* initial,
                    const FitConfig& config)
      : config_(config) {
    config_.validate();
    if (y.size() != static_cast<std::size_t>(z.rows()) || mask.size() != y.size())
      throw InvalidArgument("fit: labels/mask length does not match feature rows");
    if (offset.num_features() != z.cols() || offset.num_classes() != y.num_classes())
      throw InvalidArgument("fit: offset shape does not match features/classes");
    if (!z.allFinite()) throw InvalidArgument("fit: non-finite features");

    const auto rows = visible_indices(mask);
    if (rows.empty()) throw InvalidArgument("fit: no visible labels");
    num_visible_ = rows.size();
    num_classes_ = y.num_classes();

    zm_.resize(static_cast<Eigen::Index>(rows.size()), z.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      zm_.row(static_cast<Eigen::Index>(r)) = z.row(static_cast<Eigen::Index>(rows[r]));

    curvature_.resize(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) curvature_[j] = 0.25 * zm_.col(j).squaredNorm();

    const int c_ref = num_classes_ - 1;
    problems_.resize(static_cast<std::size_t>(c_ref));
    for (int c = 0; c < c_ref; ++c) {
      ClassProblem& p = problems_[static_cast<std::size_t>(c)];
      p.y.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        p.y[static_cast<Eigen::Index>(r)] = y.indicator(rows[r], c);
      const Vector off = offset.values().col(c);
      if (config_.penalty_mode == PenaltyMode::kShifted)
        p.center = -off;
      else
        p.center = Vector::Zero(z.cols());
      p.delta = initial ? Vector(initial->values().col(c)) : Vector::Zero(z.cols());
      p.eta = zm_ * (off + p.delta);
      p.residual.resize(p.eta.size());
      refresh_residual(p);
    }
  }

  FitResult run() {
    FitResult result;
    for (int sweep = 0; sweep < config_.max_outer; ++sweep) {
      bool all_done = true;
      for (ClassProblem& p : problems_) {
        if (!p.converged) sweep_class(p);
        all_done = all_done && p.converged;
      }
      result.objective_trace.push_back(objective());
      result.sweeps_used = sweep + 1;
      if (all_done) break;
    }
    result.converged = std::all_of(problems_.begin(), problems_.end(),
                                   [](const ClassProblem& p) { return p.converged; });
    Matrix delta(zm_.cols(), num_classes_ - 1);
    for (std::size_t c = 0; c < problems_.size(); ++c)
      delta.col(static_cast<Eigen::Index>(c)) = problems_[c].delta;
    result.coefficients = CoefficientMatrix(std::move(delta), num_classes_);
    return result;
  }

 private:
  static void refresh_residual(ClassProblem& p) {
    for (Eigen::Index i = 0; i < p.eta.size(); ++i) p.residual[i] = sigmoid(p.eta[i]) - p.y[i];
  }

  void sweep_class(ClassProblem& p) {
    for (int inner = 0; inner < config_.max_inner && !p.converged; ++inner) {
      const bool full = p.next_full || !config_.active_set;
      const double change = cycle(p, full);
      if (change < config_.tol) {
        if (full)
          p.converged = true;
        else
          p.next_full = true;
      } else {
        p.next_full = !config_.active_set;
      }
    }
  }

  // Returns the largest absolute coordinate change.
  double cycle(ClassProblem& p, bool full) {
    double largest = 0.0;
    for (Eigen::Index j = 0; j < zm_.cols(); ++j) {
      if (!full && p.delta[j] == p.center[j]) continue;
      const double curvature = curvature_[static_cast<std::size_t>(j)];
      if (curvature == 0.0) continue;  // column is zero on every visible row
      const auto column = zm_.col(j);
      const double g = column.dot(p.residual);
      // unscaled so that a coordinate at its centre stays there iff |g| <= lambda
      const double u = curvature * (p.delta[j] - p.center[j]) - g;
      const double updated =
          p.center[j] + soft_threshold(u, config_.lambda) / curvature;
      const double diff = updated - p.delta[j];
      if (diff == 0.0) continue;
      p.delta[j] = updated;
      p.eta.noalias() += diff * column;
      refresh_residual(p);
      largest = std::max(largest, std::abs(diff));
    }
    return largest;
  }

  double objective() const {
    double total = static_cast<double>(num_visible_) * std::log(2.0);
    for (const ClassProblem& p : problems_) {
      for (Eigen::Index i = 0; i < p.eta.size(); ++i)
        total += log1p_exp(p.eta[i]) - p.y[i] * p.eta[i];
      total += config_.lambda * (p.delta - p.center).cwiseAbs().sum();
    }
    return total;
  }

  FitConfig config_;
  Matrix zm_;
  std::vector<double> curvature_;
  std::vector<ClassProblem> problems_;
  std::size_t num_visible_ = 0;
  int num_classes_ = 2;
};

}  // namespace

FitResult fit(const Matrix& z, const LabelMatrix& y, const Mask& mask, const FitConfig& config,
              const std::optional<CoefficientMatrix>& warm_start) {
  const auto offset = CoefficientMatrix::zero(z.cols(), y.num_classes());
  FitConfig plain = config;
  plain.penalty_mode = PenaltyMode::kDelta;
  if (warm_start && (warm_start->num_features() != z.cols() ||
                     warm_start->num_classes() != y.num_classes()))
    throw InvalidArgument("fit: warm start shape does not match");
  CoordinateDescent solver(z, y, mask, offset, warm_start ? &*warm_start : nullptr, plain);
  return solver.run();
}

FitResult fit_offset(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                     const CoefficientMatrix& offset, const FitConfig& config) {
  CoordinateDescent solver(z, y, mask, offset, nullptr, config);
  return solver.run();
}

double lambda_max(const Matrix& z, const LabelMatrix& y, const Mask& mask) {
  if (y.size() != static_cast<std::size_t>(z.rows()) || mask.size() != y.size())
    throw InvalidArgument("lambda_max: labels/mask length does not match feature rows");
  // same compacted rows and dot products as the solver, so lambda_max is an
  // exact threshold for its first sweep
  const auto rows = visible_indices(mask);
  Matrix zm(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    zm.row(static_cast<Eigen::Index>(r)) = z.row(static_cast<Eigen::Index>(rows[r]));
  double worst = 0.0;
  Vector residual(zm.rows());
  for (int c = 0; c + 1 < y.num_classes(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r)
      residual[static_cast<Eigen::Index>(r)] = sigmoid(0.0) - y.indicator(rows[r], c);
    for (Eigen::Index j = 0; j < zm.cols(); ++j)
      worst = std::max(worst, std::abs(zm.col(j).dot(residual)));
  }
  return worst;
}

double kkt_violation(const Matrix& z, const LabelMatrix& y, const Mask& mask,
                     const CoefficientMatrix& offset, const CoefficientMatrix& delta,
                     double lambda, PenaltyMode mode) {
  const CoefficientMatrix beta(offset.values() + delta.values(), delta.num_classes());
  const Matrix g = gradient(z, y, mask, beta);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index j = 0; j < g.rows(); ++j) {
      const double center = mode == PenaltyMode::kShifted ? -offset.values()(j, c) : 0.0;
      const double at = delta.values()(j, c);
      double v = 0.0;
      if (at == center) {
        v = std::abs(g(j, c)) - lambda;
      } else {
        const double sign = at > center ? 1.0 : -1.0;
        v = std::abs(g(j, c) + lambda * sign);
      }
      worst = std::max(worst, v);
    }
  return worst;
}

}  // namespace transgcr
