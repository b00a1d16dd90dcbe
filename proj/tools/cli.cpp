#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "transgcr/eval.hpp"
#include "transgcr/io.hpp"
#include "transgcr/random.hpp"
#include "transgcr/select.hpp"
#include "transgcr/sim.hpp"
#include "transgcr/solver.hpp"
#include "transgcr/transfer.hpp"

namespace transgcr::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  unsigned threads = 1;
};

struct SolverFlags {
  double tol = 1e-6;
  int max_outer = 200;
  int max_inner = 1;

  FitConfig config(double lambda) const {
    FitConfig c;
    c.lambda = lambda;
    c.tol = tol;
    c.max_outer = max_outer;
    c.max_inner = max_inner;
    c.validate();
    return c;
  }
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--tol", f.tol, "Convergence threshold on coefficient change")->capture_default_str();
  cmd->add_option("--max-outer", f.max_outer, "Maximum majorisation sweeps")->capture_default_str();
  cmd->add_option("--max-inner", f.max_inner, "Coordinate cycles per sweep")->capture_default_str();
}

PenaltyMode parse_penalty(const std::string& s) {
  if (s == "delta") return PenaltyMode::kDelta;
  if (s == "shifted") return PenaltyMode::kShifted;
  throw InvalidArgument("penalty mode must be delta or shifted, got '" + s + "'");
}

std::vector<Dataset> load_all(const std::vector<std::string>& manifests) {
  std::vector<Dataset> out;
  for (const std::string& m : manifests) out.push_back(load_dataset(read_bundle(m)));
  return out;
}

// "m:lambda" cells separated by commas.
std::vector<std::pair<int, double>> parse_grid(const std::string& text) {
  std::vector<std::pair<int, double>> grid;
  std::istringstream in(text);
  for (std::string cell; std::getline(in, cell, ',');) {
    const auto colon = cell.find(':');
    if (colon == std::string::npos) throw InvalidArgument("cv grid cell '" + cell + "' is not m:lambda");
    try {
      std::size_t used = 0;
      const int m = std::stoi(cell.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("m");
      const std::string ls = cell.substr(colon + 1);
      const double lambda = std::stod(ls, &used);
      if (used != ls.size()) throw std::invalid_argument("lambda");
      grid.emplace_back(m, lambda);
    } catch (const std::logic_error&) {
      throw InvalidArgument("cv grid cell '" + cell + "' is not m:lambda");
    }
  }
  if (grid.empty()) throw InvalidArgument("empty cv grid");
  return grid;
}

void report_fit(std::ostream& out, const std::string& name, const FitResult& fr) {
  out << name << ".objective=" << format_double(fr.objective_trace.empty() ? 0.0 : fr.objective_trace.back())
      << "\n"
      << name << ".nonzeros=" << fr.coefficients.nonzeros() << "\n"
      << name << ".converged=" << (fr.converged ? "true" : "false") << "\n"
      << name << ".sweeps=" << fr.sweeps_used << "\n";
}

fs::path prepare_out(const Globals& g) {
  const fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ComputationError("cannot create output directory '" + g.out + "': " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  int hops = 1;
  std::optional<double> lambda;
  std::string cv_grid;
  std::size_t cv_folds = 3;
  SolverFlags solver;
};

int cmd_fit(const FitArgs& a, const Globals& g, std::ostream& out) {
  const Dataset data = load_dataset(read_bundle(a.data));
  if (a.lambda.has_value() == !a.cv_grid.empty())
    throw InvalidArgument("fit: give exactly one of --lambda and --cv-grid");
  if (a.hops < 0) throw InvalidArgument("fit: --hops must be non-negative");
  FitConfig config = a.solver.config(a.lambda.value_or(0.0));
  int hops = a.hops;
  if (!a.cv_grid.empty()) {
    const auto grid = parse_grid(a.cv_grid);
    const CvResult cv = cv_hyperparams(data, grid, a.cv_folds, g.seed.value_or(0), config);
    hops = cv.best_hops;
    config.lambda = cv.best_lambda;
    out << "cv.hops=" << hops << "\ncv.lambda=" << format_double(config.lambda) << "\n";
  }
  if (!(config.lambda >= 0.0)) throw InvalidArgument("fit: lambda must be non-negative");
  const PropagatedDomain dom = propagate_domain(data, hops);
  const FitResult fr = fit(dom.z, dom.labels, dom.mask, config);
  const fs::path dir = prepare_out(g);
  save_coefficients(fr.coefficients, dir / "coefficients.csv");
  report_fit(out, "fit", fr);
  return kOk;
}

struct TransferArgs {
  std::string target;
  std::vector<std::string> sources;
  int hops = 1;
  double lambda_beta = 0.0;
  double lambda_delta = 0.0;
  std::string penalty = "delta";
  bool include_target = false;
  SolverFlags solver;

  TransferConfig config() const {
    TransferConfig c;
    c.hops = hops;
    c.lambda_beta = lambda_beta;
    c.lambda_delta = lambda_delta;
    c.penalty_mode = parse_penalty(penalty);
    c.include_target_in_pool = include_target;
    c.solver = solver.config(0.0);
    if (hops < 0) throw InvalidArgument("--hops must be non-negative");
    if (!(lambda_beta >= 0.0) || !(lambda_delta >= 0.0))
      throw InvalidArgument("penalties must be non-negative");
    return c;
  }
};

int cmd_transfer(const TransferArgs& a, const Globals& g, std::ostream& out) {
  const TransferConfig config = a.config();
  const Dataset target = load_dataset(read_bundle(a.target));
  const std::vector<Dataset> sources = load_all(a.sources);
  if (sources.empty() && !a.include_target)
    throw InvalidArgument("transfer: no sources (pass --source or --include-target)");
  const TransferResult tr = trans_gcr(target, sources, config);
  const fs::path dir = prepare_out(g);
  save_coefficients(tr.beta_source, dir / "beta_source.csv");
  save_coefficients(tr.delta, dir / "delta.csv");
  save_coefficients(tr.beta_target, dir / "beta_target.csv");
  report_fit(out, "source", tr.source_fit);
  report_fit(out, "shift", tr.shift_fit);
  out << "target.nonzeros=" << tr.beta_target.nonzeros() << "\n";
  return kOk;
}

struct DetectArgs {
  TransferArgs transfer;
  std::size_t folds = 3;
  std::optional<std::size_t> select;
};

int cmd_detect(const DetectArgs& a, const Globals& g, std::ostream& out) {
  if (!a.select) throw InvalidArgument("detect: --select is required");
  DetectionConfig dc;
  dc.folds = a.folds;
  dc.seed = g.seed.value_or(0);
  dc.transfer = a.transfer.config();
  const Dataset target = load_dataset(read_bundle(a.transfer.target));
  const std::vector<Dataset> sources = load_all(a.transfer.sources);
  if (sources.empty()) throw InvalidArgument("detect: need at least one --source");
  TransferabilityReport report = transferability_scores(target, sources, dc, g.threads);
  report.selected = select_sources(report.scores, *a.select);

  const fs::path dir = prepare_out(g);
  std::ostringstream scores;
  scores << "source,NL\n";
  for (std::size_t k = 0; k < report.scores.size(); ++k)
    scores << k + 1 << ',' << format_double(report.scores[k]) << '\n';
  write_text(dir / "scores.csv", scores.str());
  std::ostringstream selected;
  for (std::size_t k : report.selected) selected << k + 1 << '\n';
  write_text(dir / "selected.txt", selected.str());
  out << "selected=";
  for (std::size_t i = 0; i < report.selected.size(); ++i)
    out << (i ? "," : "") << report.selected[i] + 1;
  out << "\n";
  return kOk;
}

struct SimulateArgs {
  std::string scenario;
  std::string kind;
};

int cmd_simulate(const SimulateArgs& a, const Globals& g, std::ostream& out) {
  const SimulationKind kind = parse_simulation_kind(a.kind);
  auto kv = read_key_values(a.scenario);
  if (g.seed) kv["seed"] = std::to_string(*g.seed);
  const SimulationRequest request = simulation_from_key_values(kind, kv);
  const ExperimentTable table = run_simulation(request, g.threads);
  const fs::path dir = prepare_out(g);
  save_table(table, dir / "table.csv");
  for (const auto& s : table.summarize())
    out << table.scenario_param << '=' << format_double(s.param_value) << ' ' << s.method << ' '
        << s.metric << " mean=" << format_double(s.mean) << " se=" << format_double(s.std_error)
        << " n=" << s.count << '\n';
  for (const CellFailure& f : table.failures)
    out << table.scenario_param << '=' << format_double(f.param_value) << ' ' << f.method
        << " replicate=" << f.replicate << " error=" << f.reason << '\n';
  return kOk;
}

struct EvaluateArgs {
  std::string data;
  std::string coefficients;
  std::string nodes;
  std::optional<double> train_rate;
  int hops = 1;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
  if (a.nodes.empty() == !a.train_rate.has_value())
    throw InvalidArgument("evaluate: give exactly one of --nodes and --train-rate");
  if (a.hops < 0) throw InvalidArgument("evaluate: --hops must be non-negative");
  const Dataset data = load_dataset(read_bundle(a.data));
  const CoefficientMatrix beta = load_coefficients(a.coefficients);
  if (beta.num_features() != data.num_features() || beta.num_classes() != data.num_classes())
    throw InvalidArgument("evaluate: coefficient shape does not match the dataset");

  std::vector<std::size_t> test;
  if (!a.nodes.empty()) {
    const Mask m = load_mask(a.nodes, data.num_nodes());
    test = visible_indices(m);
  } else {
    const double rate = *a.train_rate;
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("evaluate: --train-rate must lie in [0, 1)");
    std::vector<std::size_t> order(data.num_nodes());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(g.seed.value_or(0));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(rate * static_cast<double>(order.size()));
    test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(test.begin(), test.end());
  }
  for (std::size_t i : test)
    if (!data.mask[i]) throw InvalidArgument("evaluate: test node " + std::to_string(i) + " has no label");
  if (test.empty()) throw InvalidArgument("evaluate: no test nodes");

  const Matrix z = propagate(normalize_adjacency(data.graph), data.features, a.hops).values;
  const LabelMatrix predicted = predict(z, beta);
  const double micro = micro_f1(predicted, data.labels, test);
  const double macro = macro_f1(predicted, data.labels, test);
  const double nll = held_out_nll(z, data.labels, beta, test);

  const fs::path dir = prepare_out(g);
  std::ostringstream csv;
  csv << "micro_f1,macro_f1,nll,nodes\n"
      << format_double(micro) << ',' << format_double(macro) << ',' << format_double(nll) << ','
      << test.size() << '\n';
  write_text(dir / "metrics.csv", csv.str());
  out << csv.str();
  return kOk;
}

void add_transfer_flags(CLI::App* cmd, TransferArgs& a) {
  cmd->add_option("--target", a.target, "Target dataset bundle")->required();
  cmd->add_option("--source", a.sources, "Source dataset bundle (repeatable)");
  cmd->add_option("--hops", a.hops, "Propagation steps m")->capture_default_str();
  cmd->add_option("--lambda-beta", a.lambda_beta, "Penalty of the pooled source fit")->required();
  cmd->add_option("--lambda-delta", a.lambda_delta, "Penalty of the shift fit")->required();
  cmd->add_option("--penalty-mode", a.penalty, "delta or shifted")->capture_default_str();
  cmd->add_flag("--include-target", a.include_target, "Pool the target into the source fit");
  add_solver_flags(cmd, a.solver);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph convolutional logistic regression with transfer learning", "transgcr"};
  app.set_config("--config", "", "INI file; keys in [section] apply to that subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Base seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the penalised model on one dataset");
  fit_cmd->add_option("--data", fit_args.data, "Dataset bundle")->required();
  fit_cmd->add_option("--hops", fit_args.hops, "Propagation steps m")->capture_default_str();
  fit_cmd->add_option("--lambda", fit_args.lambda, "Penalty");
  fit_cmd->add_option("--cv-grid", fit_args.cv_grid, "Cross-validate over m:lambda,m:lambda,...");
  fit_cmd->add_option("--cv-folds", fit_args.cv_folds, "Folds for --cv-grid")->capture_default_str();
  add_solver_flags(fit_cmd, fit_args.solver);

  TransferArgs transfer_args;
  CLI::App* transfer_cmd = app.add_subcommand("transfer", "Two-step transfer estimator");
  add_transfer_flags(transfer_cmd, transfer_args);

  DetectArgs detect_args;
  CLI::App* detect_cmd = app.add_subcommand("detect", "Score sources by cross-validated NLL");
  add_transfer_flags(detect_cmd, detect_args.transfer);
  detect_cmd->add_option("--folds", detect_args.folds, "Folds V")->capture_default_str();
  detect_cmd->add_option("--select", detect_args.select, "Number of sources L to keep")->required();

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a synthetic experiment");
  sim_cmd->add_option("--scenario", sim_args.scenario, "key=value scenario file")->required();
  sim_cmd->add_option("--kind", sim_args.kind, "mse, detect or rate")->required();

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score saved coefficients on a dataset");
  eval_cmd->add_option("--data", eval_args.data, "Dataset bundle")->required();
  eval_cmd->add_option("--coefficients", eval_args.coefficients, "Coefficient CSV")->required();
  eval_cmd->add_option("--nodes", eval_args.nodes, "Test node ids, one per line");
  eval_cmd->add_option("--train-rate", eval_args.train_rate, "Random split; test on the rest");
  eval_cmd->add_option("--hops", eval_args.hops, "Propagation steps m")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "transgcr: " << e.what() << "\n";
    return kBadConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args, g, out);
    if (transfer_cmd->parsed()) return cmd_transfer(transfer_args, g, out);
    if (detect_cmd->parsed()) return cmd_detect(detect_args, g, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, g, out);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, g, out);
  } catch (const InvalidArgument& e) {
    err << "transgcr: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    err << "transgcr: " << e.what() << "\n";
    return kComputationFailed;
  }
  return kBadConfig;
}

}  // namespace transgcr::cli
