#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transgcr/eval.hpp"
#include "transgcr/gcr.hpp"
#include "transgcr/graph.hpp"
#include "transgcr/solver.hpp"

namespace transgcr {

/// Random-graph recipe for one domain. Text form:
///   er:<p> | sbm:<blocks>:<within>:<between> | graphon:<kind>:<param>
struct GraphSpec {
  enum class Kind { kEr, kSbm, kGraphon };

  Kind kind = Kind::kEr;
  double p = 0.05;
  std::size_t blocks = 2;
  double within = 0.05;
  double between = 0.05;
  std::optional<Graphon> graphon;

  static GraphSpec er(double p);
  static GraphSpec sbm(std::size_t blocks, double within, double between);
  static GraphSpec from_graphon(Graphon w);
  static GraphSpec parse(const std::string& text);
  std::string to_string() const;

  /// SBM blocks are balanced; the first n % blocks blocks get one extra node.
  Graph generate(std::size_t n, std::uint64_t seed) const;
};

enum class LambdaMode {
  kFixed,   // every fit uses `fixed`
  kScaled,  // lambda = kappa * sqrt(n_visible * log d)
  kCv,      // kappa of each fit chosen by V-fold cross-validation
};

/// Under kCv each fit picks its own kappa from cv_kappas: target-only and
/// naive fits by cv_hyperparams on their own data, the source step of
/// Trans-GCR on the pooled sources, and the shift step by held-out NLL of
/// the two-step estimate on target folds.
struct LambdaSettings {
  LambdaMode mode = LambdaMode::kCv;
  double fixed = 0.0;
  double kappa = 0.2;
  /// Scaled mode only; unset means `kappa`.
  std::optional<double> kappa_beta;
  std::optional<double> kappa_delta;
  std::vector<double> cv_kappas{0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6};
  std::size_t cv_folds = 3;
};

/// Penalty for a fit on n_visible labelled nodes in dimension d.
double scaled_lambda(double kappa, double n_visible, std::size_t d);

struct ScenarioConfig {
  int num_classes = 3;
  std::size_t d = 100;
  std::size_t s = 10;
  std::size_t n0 = 200;
  std::size_t num_sources = 5;
  std::size_t source_n = 400;
  double h = 1.0;
  double h_far = 10.0;
  std::size_t num_transferable = 5;
  /// Nonzero magnitude of each stored class column; columns beyond the list
  /// use 0.4 + 0.1 * c (c 0-based).
  std::vector<double> magnitudes{0.4, 0.5};
  GraphSpec target_graph = GraphSpec::er(0.05);
  GraphSpec source_graph = GraphSpec::er(0.05);
  int hops = 1;
  std::size_t replicates = 20;
  std::uint64_t seed = 1;
  LambdaSettings lambda;
  PenaltyMode penalty_mode = PenaltyMode::kDelta;
  bool include_target_in_pool = false;
  std::size_t folds = 3;
  FitConfig solver;

  /// Throws InvalidArgument.
  void validate() const;
  double magnitude(int column) const;
};

struct Truth {
  CoefficientMatrix target;
  std::vector<CoefficientMatrix> sources;
  /// Shift level of each source, (C-1)^-1 sum_c ||beta_c^(k) - beta_c^(0)||_1.
  std::vector<double> shift_levels;
};

/// Target columns carry magnitude(c) on the first s features. Source k
/// (0-based) is shifted by h_k = h for k < num_transferable and h_far
/// otherwise, with sign - on even columns and + on odd columns.
Truth build_truth(const ScenarioConfig& config);

/// X ~ N(0, 1) i.i.d., graph from `spec`, labels sampled from the model on
/// S^hops X. All randomness is derived from `seed`.
Dataset gen_domain(const GraphSpec& spec, const CoefficientMatrix& beta, std::size_t n, int hops,
                   std::uint64_t seed);

enum class SweepKind { kSourceN, kH, kSourceDensity, kSbmWithin };
enum class Method { kTransGcr, kGcrOnly, kNaiveTl };

std::string to_string(SweepKind kind);
std::string to_string(Method method);
SweepKind parse_sweep(const std::string& text);
Method parse_method(const std::string& text);

/// Seed streams. The target of replicate r does not depend on the sweep
/// value, so target-only fits are identical across a sweep. Source seeds
/// include the sweep value when there is one; detection sources omit it, so
/// the first K sources are shared between K values.
std::uint64_t target_seed(std::uint64_t base, std::size_t replicate);
std::uint64_t source_seed(std::uint64_t base, std::size_t replicate, std::size_t k,
                          std::optional<double> sweep_value);
std::uint64_t fold_seed(std::uint64_t base, std::size_t replicate);

/// Copy of `config` with the swept parameter set to `value`.
ScenarioConfig apply_sweep(const ScenarioConfig& config, SweepKind kind, double value);

/// Coefficient MSE of each method for every sweep value and replicate.
/// The target domain of replicate r is shared across sweep values.
ExperimentTable run_mse_experiment(const ScenarioConfig& config, SweepKind sweep,
                                   std::span<const double> values,
                                   std::span<const Method> methods, unsigned threads = 1);

/// AUC of the negated transferability scores against the ground-truth
/// transferable set, for each number of sources K. Degenerate cells (all
/// sources on one side) are recorded as failures.
ExperimentTable run_detection_experiment(const ScenarioConfig& config,
                                         std::span<const std::size_t> k_values,
                                         unsigned threads = 1);

struct RateCheckConfig {
  std::size_t d = 50;
  std::size_t s = 5;
  std::vector<std::size_t> n_grid{400, 800, 1600, 3200};
  double p = 0.05;
  std::size_t replicates = 20;
  /// lambda = kappa * sqrt(n log d) on the summed loss, i.e.
  /// kappa * sqrt(log d / n) on the per-node average.
  double kappa = 0.5;
  double magnitude = 0.4;
  std::uint64_t seed = 1;
  FitConfig solver;

  void validate() const;
};

struct RateCheckResult {
  ExperimentTable table;
  std::vector<double> mean_error;
  /// OLS slope of log mean squared error against log n.
  double slope = 0.0;
};

/// Binary model on ER-scaled features Z = A X / sqrt(n p); records
/// ||beta-hat - beta||^2 per replicate and fits the log-log slope.
RateCheckResult rate_check(const RateCheckConfig& config, unsigned threads = 1);

/// Mean squared error at sample size n for each kappa, on replicates whose
/// seeds are disjoint from rate_check's.
std::vector<double> kappa_grid_errors(const RateCheckConfig& config,
                                      std::span<const double> kappas, std::size_t n,
                                      unsigned threads = 1);

enum class SimulationKind { kMse, kDetect, kRate };

SimulationKind parse_simulation_kind(const std::string& text);

/// Everything `simulate` needs, read from a key=value scenario file.
struct SimulationRequest {
  SimulationKind kind = SimulationKind::kMse;
  ScenarioConfig scenario;
  SweepKind sweep = SweepKind::kSourceN;
  std::vector<double> values;
  std::vector<Method> methods{Method::kTransGcr, Method::kGcrOnly, Method::kNaiveTl};
  std::vector<std::size_t> k_values;
  RateCheckConfig rate;
};

/// Keys accepted depend on the kind; anything else throws InvalidArgument.
SimulationRequest simulation_from_key_values(SimulationKind kind,
                                             const std::map<std::string, std::string>& kv);

/// Runs the request and returns its table (rate checks add a "slope" row).
ExperimentTable run_simulation(const SimulationRequest& request, unsigned threads = 1);

/// OLS slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace transgcr
