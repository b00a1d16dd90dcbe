#include "transgcr/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "transgcr/parallel.hpp"
#include "transgcr/random.hpp"
#include "transgcr/select.hpp"
#include "transgcr/transfer.hpp"

namespace transgcr {

namespace {

// Stream tags mixed into derived seeds.
constexpr std::uint64_t kTargetStream = 0x7461726765740000ULL;
constexpr std::uint64_t kSourceStream = 0x736f757263650000ULL;
constexpr std::uint64_t kFoldStream = 0x666f6c6473000000ULL;
constexpr std::uint64_t kCvStream = 0x6376000000000000ULL;
constexpr std::uint64_t kRateStream = 0x7261746500000000ULL;
constexpr std::uint64_t kCalibrationStream = 0x63616c6962000000ULL;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw InvalidArgument(what + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw InvalidArgument(what + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw InvalidArgument(what + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) out.push_back(parse_double(part, what));
  if (out.empty()) throw InvalidArgument(what + ": empty list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const std::string& part : split(text, ',')) out.push_back(parse_uint(part, what));
  if (out.empty()) throw InvalidArgument(what + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Matrix standard_normal(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = normal(rng);
  return x;
}

double visible_fraction(std::size_t v) {
  return static_cast<double>(v - 1) / static_cast<double>(v);
}

// Kappa minimising the cross-validated NLL of a plain fit on `data`.
double kappa_by_cv(const Dataset& data, const ScenarioConfig& cfg, std::uint64_t seed) {
  const LambdaSettings& ls = cfg.lambda;
  const double n_train = static_cast<double>(count_visible(data.mask)) * visible_fraction(ls.cv_folds);
  std::vector<std::pair<int, double>> grid;
  for (double k : ls.cv_kappas) grid.emplace_back(cfg.hops, scaled_lambda(k, n_train, cfg.d));
  const CvResult cv = cv_hyperparams(data, grid, ls.cv_folds, seed, cfg.solver);
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (grid[g].second == cv.best_lambda) return ls.cv_kappas[g];
  return ls.cv_kappas.front();
}

// Kappa of the shift step, chosen by held-out NLL of the two-step estimate
// on target folds with the source estimate held fixed.
double shift_kappa_by_cv(const PropagatedDomain& target, const FitResult& source_fit,
                         const ScenarioConfig& cfg, std::uint64_t seed) {
  const LambdaSettings& ls = cfg.lambda;
  const std::vector<std::size_t> visible = visible_indices(target.mask);
  const FoldPartition part = partition_folds(visible.size(), ls.cv_folds, seed);
  const double n_train = static_cast<double>(visible.size()) * visible_fraction(ls.cv_folds);
  double best_score = 0.0, best_kappa = ls.cv_kappas.front();
  for (std::size_t g = 0; g < ls.cv_kappas.size(); ++g) {
    TransferConfig tc;
    tc.lambda_delta = scaled_lambda(ls.cv_kappas[g], n_train, cfg.d);
    tc.penalty_mode = cfg.penalty_mode;
    tc.solver = cfg.solver;
    double score = 0.0;
    for (const auto& fold : part.folds) {
      PropagatedDomain train = target;
      std::vector<std::size_t> held;
      for (std::size_t pos : fold) {
        train.mask[visible[pos]] = false;
        held.push_back(visible[pos]);
      }
      const TransferResult tr = estimate_shift(train, source_fit, tc);
      score += held_out_nll(target.z, target.labels, tr.beta_target, held);
    }
    if (g == 0 || score < best_score) {
      best_score = score;
      best_kappa = ls.cv_kappas[g];
    }
  }
  return best_kappa;
}

double fixed_or_scaled(const ScenarioConfig& cfg, double kappa, double n_visible) {
  return cfg.lambda.mode == LambdaMode::kFixed ? cfg.lambda.fixed
                                                : scaled_lambda(kappa, n_visible, cfg.d);
}

std::vector<Dataset> make_sources(const ScenarioConfig& config, const Truth& truth,
                                  std::size_t replicate, std::optional<double> sweep_value) {
  std::vector<Dataset> sources;
  sources.reserve(config.num_sources);
  for (std::size_t k = 0; k < config.num_sources; ++k)
    sources.push_back(gen_domain(config.source_graph, truth.sources[k], config.source_n,
                                 config.hops, source_seed(config.seed, replicate, k, sweep_value)));
  return sources;
}

std::string cell_id(const std::string& param, double value, std::size_t replicate) {
  return param + "=" + format_double(value) + ", replicate " + std::to_string(replicate);
}

}  // namespace

// ---------------------------------------------------------------------------

GraphSpec GraphSpec::er(double p) {
  GraphSpec g;
  g.kind = Kind::kEr;
  g.p = p;
  return g;
}

GraphSpec GraphSpec::sbm(std::size_t blocks, double within, double between) {
  GraphSpec g;
  g.kind = Kind::kSbm;
  g.blocks = blocks;
  g.within = within;
  g.between = between;
  return g;
}

GraphSpec GraphSpec::from_graphon(Graphon w) {
  GraphSpec g;
  g.kind = Kind::kGraphon;
  g.graphon = std::move(w);
  return g;
}

GraphSpec GraphSpec::parse(const std::string& text) {
  const std::vector<std::string> parts = split(trim(text), ':');
  const std::string what = "graph spec '" + text + "'";
  if (parts.empty()) throw InvalidArgument(what + ": empty");
  if (parts[0] == "er" && parts.size() == 2) {
    const double p = parse_double(parts[1], what);
    if (p < 0.0 || p > 1.0) throw InvalidArgument(what + ": p must lie in [0, 1]");
    return er(p);
  }
  if (parts[0] == "sbm" && parts.size() == 4) {
    const std::size_t blocks = parse_uint(parts[1], what);
    const double within = parse_double(parts[2], what);
    const double between = parse_double(parts[3], what);
    if (blocks == 0) throw InvalidArgument(what + ": need at least one block");
    if (within < 0 || within > 1 || between < 0 || between > 1)
      throw InvalidArgument(what + ": probabilities must lie in [0, 1]");
    return sbm(blocks, within, between);
  }
  if (parts[0] == "graphon" && parts.size() == 3)
    return from_graphon(Graphon::parse(parts[1] + ":" + parts[2]));
  throw InvalidArgument(what + ": expected er:<p>, sbm:<blocks>:<within>:<between> or "
                        "graphon:<kind>:<param>");
}

std::string GraphSpec::to_string() const {
  switch (kind) {
    case Kind::kEr:
      return "er:" + format_double(p);
    case Kind::kSbm:
      return "sbm:" + std::to_string(blocks) + ":" + format_double(within) + ":" +
             format_double(between);
    case Kind::kGraphon:
      return "graphon:" + (graphon ? graphon->id() : std::string("none"));
  }
  return "";
}

Graph GraphSpec::generate(std::size_t n, std::uint64_t seed) const {
  switch (kind) {
    case Kind::kEr:
      return gen_er(n, p, seed);
    case Kind::kSbm: {
      if (blocks == 0) throw InvalidArgument("sbm: need at least one block");
      std::vector<std::size_t> sizes(blocks, n / blocks);
      for (std::size_t b = 0; b < n % blocks; ++b) ++sizes[b];
      return gen_sbm(sizes, within, between, seed);
    }
    case Kind::kGraphon:
      if (!graphon) throw InvalidArgument("graph spec: graphon not set");
      return gen_graphon(n, *graphon, seed);
  }
  throw InvalidArgument("graph spec: unknown kind");
}

double scaled_lambda(double kappa, double n_visible, std::size_t d) {
  if (!(kappa >= 0.0) || !(n_visible >= 0.0) || d == 0)
    throw InvalidArgument("scaled_lambda: need kappa >= 0, n >= 0, d >= 1");
  const double log_d = d > 1 ? std::log(static_cast<double>(d)) : 0.0;
  return kappa * std::sqrt(n_visible * log_d);
}

void ScenarioConfig::validate() const {
  if (num_classes < 2) throw InvalidArgument("scenario: need at least two classes");
  if (d == 0) throw InvalidArgument("scenario: d must be positive");
  if (s > d) throw InvalidArgument("scenario: s must not exceed d");
  if (n0 < 2) throw InvalidArgument("scenario: n0 must be at least 2");
  if (num_transferable > num_sources)
    throw InvalidArgument("scenario: num_transferable must not exceed the number of sources");
  if (!std::isfinite(h) || !std::isfinite(h_far)) throw InvalidArgument("scenario: shifts must be finite");
  for (double m : magnitudes)
    if (!std::isfinite(m)) throw InvalidArgument("scenario: magnitudes must be finite");
  if (hops < 0) throw InvalidArgument("scenario: hops must be non-negative");
  if (replicates == 0) throw InvalidArgument("scenario: need at least one replicate");
  if (folds < 2 || folds > n0) throw InvalidArgument("scenario: need 2 <= folds <= n0");
  if (lambda.mode == LambdaMode::kFixed && !(lambda.fixed >= 0.0))
    throw InvalidArgument("scenario: fixed lambda must be non-negative");
  if (lambda.mode == LambdaMode::kScaled && !(lambda.kappa >= 0.0))
    throw InvalidArgument("scenario: kappa must be non-negative");
  if (lambda.mode == LambdaMode::kCv) {
    if (lambda.cv_kappas.empty()) throw InvalidArgument("scenario: empty cv kappa grid");
    for (double k : lambda.cv_kappas)
      if (!(k >= 0.0)) throw InvalidArgument("scenario: cv kappas must be non-negative");
    if (lambda.cv_folds < 2 || lambda.cv_folds > n0)
      throw InvalidArgument("scenario: need 2 <= cv_folds <= n0");
  }
  solver.validate();
}

double ScenarioConfig::magnitude(int column) const {
  if (column < static_cast<int>(magnitudes.size())) return magnitudes[static_cast<std::size_t>(column)];
  return 0.4 + 0.1 * column;
}

Truth build_truth(const ScenarioConfig& config) {
  config.validate();
  const int cols = config.num_classes - 1;
  const auto d = static_cast<Eigen::Index>(config.d);
  const auto s = static_cast<Eigen::Index>(config.s);
  Matrix target = Matrix::Zero(d, cols);
  for (int c = 0; c < cols; ++c) target.col(c).head(s).setConstant(config.magnitude(c));

  Truth truth{CoefficientMatrix(target, config.num_classes), {}, {}};
  for (std::size_t k = 0; k < config.num_sources; ++k) {
    const double hk = k < config.num_transferable ? config.h : config.h_far;
    Matrix b = target;
    for (int c = 0; c < cols; ++c) {
      const double sign = c % 2 == 0 ? -1.0 : 1.0;
      b.col(c).head(s).array() += sign * hk;
    }
    double level = 0.0;
    for (int c = 0; c < cols; ++c) level += (b.col(c) - target.col(c)).lpNorm<1>();
    truth.shift_levels.push_back(level / cols);
    truth.sources.emplace_back(std::move(b), config.num_classes);
  }
  return truth;
}

Dataset gen_domain(const GraphSpec& spec, const CoefficientMatrix& beta, std::size_t n, int hops,
                   std::uint64_t seed) {
  Dataset out;
  out.graph = spec.generate(n, derive_seed(seed, {1}));
  out.features = standard_normal(n, static_cast<std::size_t>(beta.num_features()),
                                 derive_seed(seed, {2}));
  const Matrix z = propagate(normalize_adjacency(out.graph), out.features, hops).values;
  out.labels = sample_labels(z, beta, derive_seed(seed, {3}));
  out.mask.assign(n, true);
  return out;
}

std::uint64_t target_seed(std::uint64_t base, std::size_t replicate) {
  return derive_seed(base, {kTargetStream, replicate});
}

std::uint64_t source_seed(std::uint64_t base, std::size_t replicate, std::size_t k,
                          std::optional<double> sweep_value) {
  if (sweep_value) return derive_seed(base, {kSourceStream, replicate, k, seed_key(*sweep_value)});
  return derive_seed(base, {kSourceStream, replicate, k});
}

std::uint64_t fold_seed(std::uint64_t base, std::size_t replicate) {
  return derive_seed(base, {kFoldStream, replicate});
}

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::kSourceN: return "source_n";
    case SweepKind::kH: return "h";
    case SweepKind::kSourceDensity: return "source_density";
    case SweepKind::kSbmWithin: return "sbm_within";
  }
  return "";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kTransGcr: return "trans_gcr";
    case Method::kGcrOnly: return "gcr_only";
    case Method::kNaiveTl: return "naive_tl";
  }
  return "";
}

SweepKind parse_sweep(const std::string& text) {
  for (SweepKind k : {SweepKind::kSourceN, SweepKind::kH, SweepKind::kSourceDensity,
                      SweepKind::kSbmWithin})
    if (to_string(k) == trim(text)) return k;
  throw InvalidArgument("unknown sweep '" + text +
                        "' (expected source_n, h, source_density or sbm_within)");
}

Method parse_method(const std::string& text) {
  for (Method m : {Method::kTransGcr, Method::kGcrOnly, Method::kNaiveTl})
    if (to_string(m) == trim(text)) return m;
  throw InvalidArgument("unknown method '" + text + "' (expected trans_gcr, gcr_only or naive_tl)");
}

ScenarioConfig apply_sweep(const ScenarioConfig& config, SweepKind kind, double value) {
  ScenarioConfig out = config;
  switch (kind) {
    case SweepKind::kSourceN:
      if (!(value >= 1.0) || value != std::floor(value))
        throw InvalidArgument("source_n sweep: values must be positive integers");
      out.source_n = static_cast<std::size_t>(value);
      break;
    case SweepKind::kH:
      out.h = value;
      break;
    case SweepKind::kSourceDensity:
      if (out.source_graph.kind == GraphSpec::Kind::kSbm) {
        out.source_graph.within = value;
        out.source_graph.between = value;
      } else {
        out.source_graph = GraphSpec::er(value);
      }
      break;
    case SweepKind::kSbmWithin:
      if (out.source_graph.kind != GraphSpec::Kind::kSbm)
        throw InvalidArgument("sbm_within sweep: source graph must be an SBM");
      out.source_graph.within = value;
      break;
  }
  return out;
}

ExperimentTable run_mse_experiment(const ScenarioConfig& config, SweepKind sweep,
                                   std::span<const double> values,
                                   std::span<const Method> methods, unsigned threads) {
  config.validate();
  if (values.empty()) throw InvalidArgument("run_mse_experiment: empty sweep grid");
  if (methods.empty()) throw InvalidArgument("run_mse_experiment: no methods");
  std::vector<ScenarioConfig> configs;
  for (double v : values) {
    configs.push_back(apply_sweep(config, sweep, v));
    configs.back().validate();
  }
  const std::string param = to_string(sweep);
  const std::size_t reps = config.replicates;

  // Targets do not depend on the sweep value; build them once, together
  // with the target-only penalty.
  const Truth base_truth = build_truth(config);
  const LambdaSettings& ls = config.lambda;
  std::vector<Dataset> targets(reps);
  std::vector<double> target_kappa(reps, ls.kappa);
  parallel_for(reps, threads, [&](std::size_t r) {
    try {
      targets[r] = gen_domain(config.target_graph, base_truth.target, config.n0, config.hops,
                              target_seed(config.seed, r));
      if (ls.mode == LambdaMode::kCv)
        target_kappa[r] = kappa_by_cv(targets[r], config, derive_seed(config.seed, {kCvStream, r, 0}));
    } catch (const std::exception& e) {
      throw ComputationError("mse experiment, replicate " + std::to_string(r) + ": " + e.what());
    }
  });

  const std::size_t cells = values.size() * reps;
  std::vector<std::vector<double>> results(cells);
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t vi = cell / reps, r = cell % reps;
    const ScenarioConfig& cfg = configs[vi];
    try {
      const Truth truth = build_truth(cfg);
      const Dataset& target = targets[r];
      const std::vector<Dataset> sources = make_sources(cfg, truth, r, values[vi]);
      const double n0 = static_cast<double>(cfg.n0);
      const double n_pool = static_cast<double>(cfg.num_sources * cfg.source_n);
      const auto cv_seed = [&](std::uint64_t tag) {
        return derive_seed(cfg.seed, {kCvStream, r, tag, seed_key(values[vi])});
      };
      std::vector<double>& out = results[cell];
      for (Method m : methods) {
        switch (m) {
          case Method::kTransGcr: {
            std::vector<Dataset> pool = sources;
            if (cfg.include_target_in_pool) pool.push_back(target);
            if (pool.empty()) throw InvalidArgument("trans_gcr needs at least one source");
            const double n_beta = cfg.include_target_in_pool ? n_pool + n0 : n_pool;
            const PropagatedDomain target_dom = propagate_domain(target, cfg.hops);
            TransferConfig tc;
            tc.hops = cfg.hops;
            tc.penalty_mode = cfg.penalty_mode;
            tc.include_target_in_pool = cfg.include_target_in_pool;
            tc.solver = cfg.solver;
            if (ls.mode != LambdaMode::kCv) {
              tc.lambda_beta = fixed_or_scaled(cfg, ls.kappa_beta.value_or(ls.kappa), n_beta);
              tc.lambda_delta = fixed_or_scaled(cfg, ls.kappa_delta.value_or(ls.kappa), n0);
              out.push_back(coef_mse(trans_gcr(target, sources, tc).beta_target, truth.target));
              break;
            }
            const PooledDataset pooled = pool_sources(pool);
            const double kappa_beta = kappa_by_cv(pooled.combined, cfg, cv_seed(1));
            FitConfig source_config = cfg.solver;
            source_config.lambda = scaled_lambda(kappa_beta, n_beta, cfg.d);
            const PropagatedDomain pooled_dom = propagate_domain(pooled.combined, cfg.hops);
            const FitResult source_fit =
                fit(pooled_dom.z, pooled_dom.labels, pooled_dom.mask, source_config);
            const double kappa_delta = shift_kappa_by_cv(target_dom, source_fit, cfg, cv_seed(2));
            tc.lambda_beta = source_config.lambda;
            tc.lambda_delta = scaled_lambda(kappa_delta, n0, cfg.d);
            out.push_back(
                coef_mse(estimate_shift(target_dom, source_fit, tc).beta_target, truth.target));
            break;
          }
          case Method::kGcrOnly: {
            FitConfig fc = cfg.solver;
            fc.lambda = fixed_or_scaled(cfg, target_kappa[r], n0);
            const PropagatedDomain dom = propagate_domain(target, cfg.hops);
            out.push_back(coef_mse(fit(dom.z, dom.labels, dom.mask, fc).coefficients, truth.target));
            break;
          }
          case Method::kNaiveTl: {
            double kappa = ls.kappa;
            if (ls.mode == LambdaMode::kCv) {
              std::vector<Dataset> all{target};
              all.insert(all.end(), sources.begin(), sources.end());
              kappa = kappa_by_cv(pool_sources(all).combined, cfg, cv_seed(3));
            }
            out.push_back(coef_mse(naive_tl(target, sources, cfg.hops,
                                            fixed_or_scaled(cfg, kappa, n0 + n_pool), cfg.solver),
                                   truth.target));
            break;
          }
        }
      }
    } catch (const std::exception& e) {
      throw ComputationError("mse experiment, " + cell_id(param, values[vi], r) + ": " + e.what());
    }
  });

  ExperimentTable table;
  table.scenario_param = param;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t vi = cell / reps, r = cell % reps;
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      table.add(values[vi], to_string(methods[mi]), static_cast<int>(r), "mse", results[cell][mi]);
  }
  return table;
}

ExperimentTable run_detection_experiment(const ScenarioConfig& config,
                                         std::span<const std::size_t> k_values,
                                         unsigned threads) {
  if (k_values.empty()) throw InvalidArgument("run_detection_experiment: empty K grid");
  std::size_t k_max = 0;
  for (std::size_t k : k_values) {
    if (k == 0) throw InvalidArgument("run_detection_experiment: K must be positive");
    k_max = std::max(k_max, k);
  }
  ScenarioConfig full = config;
  full.num_sources = k_max;
  full.num_transferable = std::min(config.num_transferable, k_max);
  full.validate();
  const std::size_t reps = config.replicates;
  const Truth truth = build_truth(full);

  const LambdaSettings& ls = full.lambda;
  const double n_train = static_cast<double>(full.n0) * visible_fraction(full.folds);

  // Sources are nested across K: replicate r always draws the same source k,
  // and a source's score does not depend on which other sources are present.
  std::vector<Dataset> targets(reps);
  std::vector<double> delta_kappa(reps, ls.kappa_delta.value_or(ls.kappa));
  std::vector<std::vector<Dataset>> sources(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    try {
      targets[r] = gen_domain(full.target_graph, truth.target, full.n0, full.hops,
                              target_seed(full.seed, r));
      if (ls.mode == LambdaMode::kCv)
        delta_kappa[r] = kappa_by_cv(targets[r], full, derive_seed(full.seed, {kCvStream, r, 0}));
      sources[r] = make_sources(full, truth, r, std::nullopt);
    } catch (const std::exception& e) {
      throw ComputationError("detection experiment, replicate " + std::to_string(r) + ": " +
                             e.what());
    }
  });

  std::vector<double> scores(reps * k_max);
  parallel_for(reps * k_max, threads, [&](std::size_t cell) {
    const std::size_t r = cell / k_max, k = cell % k_max;
    try {
      const double n_beta =
          static_cast<double>(full.source_n) + (full.include_target_in_pool ? n_train : 0.0);
      double kappa_beta = ls.kappa_beta.value_or(ls.kappa);
      if (ls.mode == LambdaMode::kCv)
        kappa_beta = kappa_by_cv(sources[r][k], full, derive_seed(full.seed, {kCvStream, r, 1, k}));
      DetectionConfig dc;
      dc.folds = full.folds;
      dc.seed = fold_seed(full.seed, r);
      dc.transfer.hops = full.hops;
      dc.transfer.lambda_beta = fixed_or_scaled(full, kappa_beta, n_beta);
      dc.transfer.lambda_delta = fixed_or_scaled(full, delta_kappa[r], n_train);
      dc.transfer.penalty_mode = full.penalty_mode;
      dc.transfer.include_target_in_pool = full.include_target_in_pool;
      dc.transfer.solver = full.solver;
      const std::span<const Dataset> one(&sources[r][k], 1);
      scores[cell] = transferability_scores(targets[r], one, dc).scores[0];
    } catch (const std::exception& e) {
      throw ComputationError("detection experiment, replicate " + std::to_string(r) + ", source " +
                             std::to_string(k) + ": " + e.what());
    }
  });

  const std::size_t cells = k_values.size() * reps;
  std::vector<std::optional<double>> aucs(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t ki = cell / reps, r = cell % reps;
    const std::size_t k = k_values[ki];
    std::vector<bool> transferable(k);
    std::vector<double> negated(k);
    std::size_t positives = 0;
    for (std::size_t j = 0; j < k; ++j) {
      transferable[j] = j < full.num_transferable;
      positives += transferable[j] ? 1 : 0;
      negated[j] = -scores[r * k_max + j];
    }
    if (positives > 0 && positives < k) aucs[cell] = auc(negated, transferable);
  }

  ExperimentTable table;
  table.scenario_param = "K";
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t ki = cell / reps, r = cell % reps;
    const double kv = static_cast<double>(k_values[ki]);
    if (aucs[cell])
      table.add(kv, "trans_gcr", static_cast<int>(r), "auc", *aucs[cell]);
    else
      table.failures.push_back({kv, "trans_gcr", static_cast<int>(r), "degenerate_labels"});
  }
  return table;
}

void RateCheckConfig::validate() const {
  if (d == 0 || s > d) throw InvalidArgument("rate check: need d >= 1 and s <= d");
  if (n_grid.empty()) throw InvalidArgument("rate check: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw InvalidArgument("rate check: n must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw InvalidArgument("rate check: n grid must be increasing");
  }
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("rate check: p must lie in (0, 1]");
  if (replicates == 0) throw InvalidArgument("rate check: need at least one replicate");
  if (!(kappa >= 0.0)) throw InvalidArgument("rate check: kappa must be non-negative");
  if (!std::isfinite(magnitude)) throw InvalidArgument("rate check: magnitude must be finite");
  solver.validate();
}

namespace {

double rate_replicate(const RateCheckConfig& config, double kappa, std::size_t n,
                      std::uint64_t seed) {
  const Graph g = gen_er(n, config.p, derive_seed(seed, {1}));
  const Matrix x = standard_normal(n, config.d, derive_seed(seed, {2}));
  const Matrix z = er_scale(g, x, config.p).values;
  Matrix b = Matrix::Zero(static_cast<Eigen::Index>(config.d), 1);
  b.col(0).head(static_cast<Eigen::Index>(config.s)).setConstant(config.magnitude);
  const CoefficientMatrix truth(b, 2);
  const LabelMatrix y = sample_labels(z, truth, derive_seed(seed, {3}));
  FitConfig fc = config.solver;
  fc.lambda = scaled_lambda(kappa, static_cast<double>(n), config.d);
  const FitResult fr = fit(z, y, Mask(n, true), fc);
  return (fr.coefficients.values() - b).squaredNorm();
}

}  // namespace

RateCheckResult rate_check(const RateCheckConfig& config, unsigned threads) {
  config.validate();
  const std::size_t reps = config.replicates;
  const std::size_t cells = config.n_grid.size() * reps;
  std::vector<double> errors(cells);
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t ni = cell / reps, r = cell % reps;
    const std::size_t n = config.n_grid[ni];
    try {
      errors[cell] = rate_replicate(config, config.kappa, n,
                                    derive_seed(config.seed, {kRateStream, n, r}));
    } catch (const std::exception& e) {
      throw ComputationError("rate check, " + cell_id("n", static_cast<double>(n), r) + ": " +
                             e.what());
    }
  });

  RateCheckResult out;
  out.table.scenario_param = "n";
  std::vector<double> log_n, log_err;
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double e = errors[ni * reps + r];
      out.table.add(static_cast<double>(config.n_grid[ni]), "gcr", static_cast<int>(r), "sq_error", e);
      sum += e;
    }
    const double mean = sum / static_cast<double>(reps);
    out.mean_error.push_back(mean);
    log_n.push_back(std::log(static_cast<double>(config.n_grid[ni])));
    log_err.push_back(std::log(mean));
  }
  out.slope = ols_slope(log_n, log_err);
  return out;
}

std::vector<double> kappa_grid_errors(const RateCheckConfig& config,
                                      std::span<const double> kappas, std::size_t n,
                                      unsigned threads) {
  config.validate();
  const std::size_t reps = config.replicates;
  std::vector<double> errors(kappas.size() * reps);
  // Every kappa sees the same replicate data.
  parallel_for(errors.size(), threads, [&](std::size_t cell) {
    const std::size_t ki = cell / reps, r = cell % reps;
    errors[cell] = rate_replicate(config, kappas[ki], n,
                                  derive_seed(config.seed, {kCalibrationStream, n, r}));
  });
  std::vector<double> means(kappas.size());
  for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) sum += errors[ki * reps + r];
    means[ki] = sum / static_cast<double>(reps);
  }
  return means;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ols_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("ols_slope: x has no spread");
  return sxy / sxx;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman: need two or more pairs");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("spearman: constant input");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Scenario files

SimulationKind parse_simulation_kind(const std::string& text) {
  const std::string t = trim(text);
  if (t == "mse") return SimulationKind::kMse;
  if (t == "detect") return SimulationKind::kDetect;
  if (t == "rate") return SimulationKind::kRate;
  throw InvalidArgument("unknown simulation kind '" + text + "' (expected mse, detect or rate)");
}

namespace {

// Applies solver keys shared by every kind. Returns true if the key was used.
bool apply_solver_key(FitConfig& solver, const std::string& key, const std::string& value) {
  if (key == "tol") solver.tol = parse_double(value, key);
  else if (key == "max_outer") solver.max_outer = static_cast<int>(parse_uint(value, key));
  else if (key == "max_inner") solver.max_inner = static_cast<int>(parse_uint(value, key));
  else if (key == "active_set") solver.active_set = parse_bool(value, key);
  else return false;
  return true;
}

bool apply_scenario_key(ScenarioConfig& c, const std::string& key, const std::string& value) {
  if (key == "classes") c.num_classes = static_cast<int>(parse_uint(value, key));
  else if (key == "d") c.d = parse_uint(value, key);
  else if (key == "s") c.s = parse_uint(value, key);
  else if (key == "n0") c.n0 = parse_uint(value, key);
  else if (key == "num_sources") c.num_sources = parse_uint(value, key);
  else if (key == "source_n") c.source_n = parse_uint(value, key);
  else if (key == "h") c.h = parse_double(value, key);
  else if (key == "h_far") c.h_far = parse_double(value, key);
  else if (key == "num_transferable") c.num_transferable = parse_uint(value, key);
  else if (key == "magnitudes") c.magnitudes = parse_double_list(value, key);
  else if (key == "target_graph") c.target_graph = GraphSpec::parse(value);
  else if (key == "source_graph") c.source_graph = GraphSpec::parse(value);
  else if (key == "hops") c.hops = static_cast<int>(parse_uint(value, key));
  else if (key == "replicates") c.replicates = parse_uint(value, key);
  else if (key == "seed") c.seed = parse_uint(value, key);
  else if (key == "lambda_mode") {
    const std::string t = trim(value);
    if (t == "fixed") c.lambda.mode = LambdaMode::kFixed;
    else if (t == "scaled") c.lambda.mode = LambdaMode::kScaled;
    else if (t == "cv") c.lambda.mode = LambdaMode::kCv;
    else throw InvalidArgument("lambda_mode: expected fixed, scaled or cv, got '" + value + "'");
  } else if (key == "lambda") c.lambda.fixed = parse_double(value, key);
  else if (key == "kappa") c.lambda.kappa = parse_double(value, key);
  else if (key == "kappa_beta") c.lambda.kappa_beta = parse_double(value, key);
  else if (key == "kappa_delta") c.lambda.kappa_delta = parse_double(value, key);
  else if (key == "cv_kappas") c.lambda.cv_kappas = parse_double_list(value, key);
  else if (key == "cv_folds") c.lambda.cv_folds = parse_uint(value, key);
  else if (key == "penalty_mode") {
    const std::string t = trim(value);
    if (t == "delta") c.penalty_mode = PenaltyMode::kDelta;
    else if (t == "shifted") c.penalty_mode = PenaltyMode::kShifted;
    else throw InvalidArgument("penalty_mode: expected delta or shifted, got '" + value + "'");
  } else if (key == "include_target_in_pool") c.include_target_in_pool = parse_bool(value, key);
  else if (key == "folds") c.folds = parse_uint(value, key);
  else return apply_solver_key(c.solver, key, value);
  return true;
}

bool apply_rate_key(RateCheckConfig& c, const std::string& key, const std::string& value) {
  if (key == "d") c.d = parse_uint(value, key);
  else if (key == "s") c.s = parse_uint(value, key);
  else if (key == "n_grid") c.n_grid = parse_size_list(value, key);
  else if (key == "p") c.p = parse_double(value, key);
  else if (key == "replicates") c.replicates = parse_uint(value, key);
  else if (key == "kappa") c.kappa = parse_double(value, key);
  else if (key == "magnitude") c.magnitude = parse_double(value, key);
  else if (key == "seed") c.seed = parse_uint(value, key);
  else return apply_solver_key(c.solver, key, value);
  return true;
}

}  // namespace

SimulationRequest simulation_from_key_values(SimulationKind kind,
                                             const std::map<std::string, std::string>& kv) {
  SimulationRequest req;
  req.kind = kind;
  for (const auto& [key, value] : kv) {
    bool used = false;
    switch (kind) {
      case SimulationKind::kMse:
        if (key == "sweep") {
          req.sweep = parse_sweep(value);
          used = true;
        } else if (key == "values") {
          req.values = parse_double_list(value, key);
          used = true;
        } else if (key == "methods") {
          req.methods.clear();
          for (const std::string& m : split(value, ',')) req.methods.push_back(parse_method(m));
          used = true;
        } else {
          used = apply_scenario_key(req.scenario, key, value);
        }
        break;
      case SimulationKind::kDetect:
        if (key == "k_values") {
          req.k_values = parse_size_list(value, key);
          used = true;
        } else {
          used = apply_scenario_key(req.scenario, key, value);
        }
        break;
      case SimulationKind::kRate:
        used = apply_rate_key(req.rate, key, value);
        break;
    }
    if (!used) throw InvalidArgument("scenario file: unknown key '" + key + "'");
  }
  switch (kind) {
    case SimulationKind::kMse:
      if (req.values.empty()) throw InvalidArgument("scenario file: mse needs 'values'");
      req.scenario.validate();
      break;
    case SimulationKind::kDetect:
      if (req.k_values.empty()) throw InvalidArgument("scenario file: detect needs 'k_values'");
      req.scenario.validate();
      break;
    case SimulationKind::kRate:
      req.rate.validate();
      break;
  }
  return req;
}

ExperimentTable run_simulation(const SimulationRequest& request, unsigned threads) {
  switch (request.kind) {
    case SimulationKind::kMse:
      return run_mse_experiment(request.scenario, request.sweep, request.values, request.methods,
                                threads);
    case SimulationKind::kDetect:
      return run_detection_experiment(request.scenario, request.k_values, threads);
    case SimulationKind::kRate: {
      RateCheckResult r = rate_check(request.rate, threads);
      r.table.add(0.0, "gcr", 0, "slope", r.slope);
      return std::move(r.table);
    }
  }
  throw InvalidArgument("run_simulation: unknown kind");
}

}  // namespace transgcr
