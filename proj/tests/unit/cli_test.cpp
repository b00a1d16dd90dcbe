#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "cli.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "transgcr/eval.hpp"
#include "transgcr/io.hpp"
#include "transgcr/random.hpp"
#include "transgcr/sim.hpp"

namespace transgcr {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "transgcr");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> report(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("transgcr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ScenarioConfig sc;
    sc.d = 12;
    sc.s = 3;
    sc.num_sources = 2;
    sc.num_transferable = 1;
    Truth t = build_truth(sc);
    target = gen_domain(GraphSpec::er(0.05), t.target, 120, 1, 1);
    source = gen_domain(GraphSpec::er(0.05), t.sources[0], 200, 1, 2);
    far = gen_domain(GraphSpec::er(0.05), t.sources[1], 200, 1, 3);
    save_dataset(target, dir, "target");
    save_dataset(source, dir, "source");
    save_dataset(far, dir, "far");
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string bundle(const std::string& stem) const { return (dir / (stem + ".bundle")).string(); }
  std::string out(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
  Dataset target, source, far;
};

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli_run({}).code, cli::kBadConfig);
  EXPECT_EQ(cli_run({"frobnicate"}).code, cli::kBadConfig);
  EXPECT_EQ(cli_run({"fit", "--data", bundle("target")}).code, cli::kBadConfig);
  EXPECT_EQ(cli_run({"fit", "--data", bundle("nope"), "--lambda", "1"}).code, cli::kBadConfig);
  Invocation bad = cli_run({"--out", out("o"), "fit", "--data", bundle("target"), "--lambda", "-1"});
  EXPECT_EQ(bad.code, cli::kBadConfig);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_FALSE(fs::exists(dir / "o"));
  EXPECT_EQ(cli_run({"detect", "--target", bundle("target"), "--source", bundle("source"),
                     "--lambda-beta", "1", "--lambda-delta", "1"})
                .code,
            cli::kBadConfig);
  EXPECT_EQ(cli_run({"--help"}).code, cli::kOk);
}

TEST_F(CliTest, ComputationFailureIsExitOne) {
  // the output path is an existing file, so the directory cannot be created
  std::ofstream(dir / "blocker") << "x";
  Invocation r = cli_run({"--out", (dir / "blocker" / "sub").string(), "fit", "--data", bundle("target"),
                   "--lambda", "1"});
  EXPECT_EQ(r.code, cli::kComputationFailed);
}

TEST_F(CliTest, FitHugeLambdaIsNullModel) {
  Invocation r = cli_run({"--out", out("f"), "fit", "--data", bundle("target"), "--lambda", "1e12"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto kv = report(r.out);
  EXPECT_EQ(kv["fit.nonzeros"], "0");
  EXPECT_NEAR(std::stod(kv["fit.objective"]), 120 * 3 * std::log(2.0), 1e-9);
  EXPECT_EQ(load_coefficients(dir / "f" / "coefficients.csv"), CoefficientMatrix::zero(12, 3));
}

TEST_F(CliTest, FitIsDeterministic) {
  const std::vector<std::string> base{"fit", "--data", bundle("target"), "--lambda", "3"};
  auto a = base, b = base;
  a.insert(a.begin(), {"--out", out("a")});
  b.insert(b.begin(), {"--out", out("b")});
  ASSERT_EQ(cli_run(a).code, 0);
  ASSERT_EQ(cli_run(b).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "coefficients.csv"), slurp(dir / "b" / "coefficients.csv"));
}

TEST_F(CliTest, OneCellGridEqualsFixedLambda) {
  Invocation cv = cli_run({"--out", out("cv"), "fit", "--data", bundle("target"), "--cv-grid", "1:2.5"});
  Invocation fixed = cli_run({"--out", out("fx"), "fit", "--data", bundle("target"), "--lambda", "2.5"});
  ASSERT_EQ(cv.code, 0) << cv.err;
  ASSERT_EQ(fixed.code, 0);
  EXPECT_EQ(slurp(dir / "cv" / "coefficients.csv"), slurp(dir / "fx" / "coefficients.csv"));
  EXPECT_EQ(report(cv.out)["cv.lambda"], "2.5");
  EXPECT_EQ(cli_run({"fit", "--data", bundle("target"), "--cv-grid", "x"}).code, cli::kBadConfig);
}

TEST_F(CliTest, ConfigFileSections) {
  std::ofstream(dir / "run.ini") << "out=" << out("ini") << "\n[fit]\ndata=" << bundle("target")
                                 << "\nlambda=2.5\n";
  Invocation r = cli_run({"--config", (dir / "run.ini").string(), "fit"});
  ASSERT_EQ(r.code, 0) << r.err;
  cli_run({"--out", out("flag"), "fit", "--data", bundle("target"), "--lambda", "2.5"});
  EXPECT_EQ(slurp(dir / "ini" / "coefficients.csv"), slurp(dir / "flag" / "coefficients.csv"));
  std::ofstream(dir / "bad.ini") << "[fit]\nwobble=1\n";
  EXPECT_EQ(cli_run({"--config", (dir / "bad.ini").string(), "fit"}).code, cli::kBadConfig);
}

TEST_F(CliTest, TransferFilesSatisfyIdentity) {
  Invocation r = cli_run({"--out", out("t"), "transfer", "--target", bundle("target"), "--source",
                   bundle("source"), "--source", bundle("far"), "--lambda-beta", "3",
                   "--lambda-delta", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto a = load_coefficients(dir / "t" / "beta_source.csv");
  auto d = load_coefficients(dir / "t" / "delta.csv");
  auto b = load_coefficients(dir / "t" / "beta_target.csv");
  EXPECT_EQ(b.values(), a.values() + d.values());
}

TEST_F(CliTest, TransferHugeShiftPenaltyAndTargetOnly) {
  Invocation r = cli_run({"--out", out("t"), "transfer", "--target", bundle("target"), "--source",
                   bundle("source"), "--lambda-beta", "3", "--lambda-delta", "1e12"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir / "t" / "delta.csv"), "# d=12 C=3\nfeature,class,value\n");

  Invocation self = cli_run({"--out", out("s"), "transfer", "--target", bundle("target"), "--include-target",
                      "--lambda-beta", "3", "--lambda-delta", "1e12"});
  ASSERT_EQ(self.code, 0) << self.err;
  cli_run({"--out", out("f"), "fit", "--data", bundle("target"), "--lambda", "3"});
  EXPECT_EQ(slurp(dir / "s" / "beta_target.csv"), slurp(dir / "f" / "coefficients.csv"));
  EXPECT_EQ(cli_run({"transfer", "--target", bundle("target"), "--lambda-beta", "1",
                     "--lambda-delta", "1"})
                .code,
            cli::kBadConfig);
  EXPECT_EQ(cli_run({"transfer", "--target", bundle("target"), "--source", bundle("source"),
                     "--lambda-beta", "1", "--lambda-delta", "1", "--penalty-mode", "odd"})
                .code,
            cli::kBadConfig);
}

TEST_F(CliTest, DetectDuplicatesAndSelectAll) {
  Invocation r = cli_run({"--out", out("d"), "--seed", "4", "detect", "--target", bundle("target"),
                   "--source", bundle("source"), "--source", bundle("source"), "--source",
                   bundle("far"), "--lambda-beta", "3", "--lambda-delta", "2", "--select", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(dir / "d" / "scores.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "source,NL");
  std::vector<double> nl;
  while (std::getline(in, line)) nl.push_back(std::stod(line.substr(line.find(',') + 1)));
  ASSERT_EQ(nl.size(), 3u);
  EXPECT_NEAR(nl[0], nl[1], 1e-9);
  EXPECT_THAT(r.out, HasSubstr("selected="));
  // all three selected, ranked by score with ties to the lower index
  const std::string expect = nl[2] < nl[0] ? "selected=3,1,2\n" : "selected=1,2,3\n";
  EXPECT_EQ(r.out, expect);
  EXPECT_EQ(slurp(dir / "d" / "selected.txt"), nl[2] < nl[0] ? "3\n1\n2\n" : "1\n2\n3\n");
}

TEST_F(CliTest, DetectMatchesSimulationHarness) {
  ScenarioConfig sc;
  sc.d = 30;
  sc.s = 3;
  sc.n0 = 90;
  sc.source_n = 150;
  sc.num_sources = 4;
  sc.num_transferable = 2;
  sc.replicates = 2;
  sc.seed = 17;
  sc.lambda.mode = LambdaMode::kScaled;
  sc.lambda.kappa = 0.3;
  const std::vector<std::size_t> k{4};
  ExperimentTable t = run_detection_experiment(sc, k);

  Truth truth = build_truth(sc);
  const double lb = scaled_lambda(0.3, 150, 30);
  const double ld = scaled_lambda(0.3, 90.0 * 2.0 / 3.0, 30);
  for (std::size_t r = 0; r < 2; ++r) {
    const std::string tag = "r" + std::to_string(r);
    save_dataset(gen_domain(sc.target_graph, truth.target, sc.n0, 1, target_seed(sc.seed, r)), dir,
                 tag + "t");
    std::vector<std::string> args{"--out", out(tag), "--seed", std::to_string(fold_seed(sc.seed, r)),
                                  "detect", "--target", bundle(tag + "t"), "--lambda-beta",
                                  format_double(lb), "--lambda-delta", format_double(ld), "--select", "2"};
    for (std::size_t j = 0; j < 4; ++j) {
      save_dataset(gen_domain(sc.source_graph, truth.sources[j], sc.source_n, 1,
                              source_seed(sc.seed, r, j, std::nullopt)),
                   dir, tag + "s" + std::to_string(j));
      args.push_back("--source");
      args.push_back(bundle(tag + "s" + std::to_string(j)));
    }
    Invocation run = cli_run(args);
    ASSERT_EQ(run.code, 0) << run.err;
    std::istringstream in(slurp(dir / tag / "scores.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<double> neg;
    while (std::getline(in, line)) neg.push_back(-std::stod(line.substr(line.find(',') + 1)));
    const double cli_auc = auc(neg, {true, true, false, false});
    for (const auto& rec : t.records)
      if (rec.replicate == static_cast<int>(r)) EXPECT_EQ(rec.value, cli_auc);
  }
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  std::ofstream(dir / "s.txt") << "d=15\ns=3\nn0=60\nsource_n=80\nnum_sources=2\nnum_transferable=2\n"
                                  "replicates=3\nlambda_mode=scaled\nsweep=source_n\nvalues=40,80\n"
                                  "methods=gcr_only,trans_gcr\n";
  const std::string scen = (dir / "s.txt").string();
  ASSERT_EQ(cli_run({"--out", out("a"), "--seed", "5", "simulate", "--scenario", scen, "--kind", "mse"}).code, 0);
  ASSERT_EQ(cli_run({"--out", out("b"), "--seed", "5", "--threads", "4", "simulate", "--scenario", scen,
                     "--kind", "mse"})
                .code,
            0);
  ASSERT_EQ(cli_run({"--out", out("c"), "--seed", "6", "simulate", "--scenario", scen, "--kind", "mse"}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "table.csv"), slurp(dir / "b" / "table.csv"));
  EXPECT_NE(slurp(dir / "a" / "table.csv"), slurp(dir / "c" / "table.csv"));

  // gcr_only flat across the source_n sweep
  std::istringstream in(slurp(dir / "a" / "table.csv"));
  std::map<std::string, std::string> seen;
  for (std::string line; std::getline(in, line);) {
    if (line.find(",gcr_only,") == std::string::npos) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    auto [it, fresh] = seen.emplace(f[3], f[5]);
    if (!fresh) EXPECT_EQ(it->second, f[5]);
  }
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_EQ(cli_run({"--out", out("x"), "simulate", "--scenario", scen, "--kind", "nope"}).code,
            cli::kBadConfig);
}

TEST_F(CliTest, SimulateRateSlope) {
  std::ofstream(dir / "r.txt") << "replicates=5\nn_grid=400,1600\nkappa=0.3\n";
  Invocation r = cli_run({"--out", out("r"), "simulate", "--scenario", (dir / "r.txt").string(), "--kind", "rate"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_THAT(slurp(dir / "r" / "table.csv"), HasSubstr("n,0,gcr,0,slope,-"));
}

TEST_F(CliTest, EvaluatePerfectAndNullCoefficients) {
  // labels equal to the argmax of the model are predicted perfectly
  Dataset ds = target;
  CoefficientMatrix b(testutil::uniform_matrix(12, 2, 1.0, 3), 3);
  Matrix z = propagate(NormalizedAdjacency(ds.graph), ds.features, 1).values;
  ds.labels = predict(z, b);
  save_dataset(ds, dir, "perfect");
  save_coefficients(b, dir / "b.csv");
  {
    std::ofstream nodes(dir / "nodes.txt");
    for (int i = 0; i < 120; ++i) nodes << i << "\n";
  }
  Invocation r = cli_run({"--out", out("e"), "evaluate", "--data", bundle("perfect"), "--coefficients",
                   (dir / "b.csv").string(), "--nodes", (dir / "nodes.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_THAT(r.out, HasSubstr("\n1,1,"));

  save_coefficients(CoefficientMatrix::zero(12, 3), dir / "zero.csv");
  Invocation n = cli_run({"--out", out("n"), "--seed", "3", "evaluate", "--data", bundle("target"),
                   "--coefficients", (dir / "zero.csv").string(), "--train-rate", "0.5"});
  ASSERT_EQ(n.code, 0) << n.err;
  // ties go to class 0, so every node is predicted 0; confusion oracle on the same split
  std::vector<std::size_t> order(120);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(3);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> test(order.begin() + 60, order.end());
  std::vector<int> truth(target.labels.assignments().begin(), target.labels.assignments().end());
  Matrix cm = oracle::confusion(std::vector<int>(120, 0), truth, test, 3);
  std::istringstream in(n.out);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_NEAR(std::stod(row.substr(0, row.find(','))), oracle::micro_f1(cm), 1e-15);
  EXPECT_EQ(row.substr(row.rfind(',') + 1), "60");

  Invocation again = cli_run({"--out", out("n2"), "--seed", "3", "evaluate", "--data", bundle("target"),
                       "--coefficients", (dir / "zero.csv").string(), "--train-rate", "0.5"});
  EXPECT_EQ(again.out, n.out);
  EXPECT_EQ(cli_run({"evaluate", "--data", bundle("target"), "--coefficients",
                     (dir / "zero.csv").string()})
                .code,
            cli::kBadConfig);
}

}  // namespace
}  // namespace transgcr
