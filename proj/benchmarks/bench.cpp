#include <benchmark/benchmark.h>

#include <vector>

#include "transgcr/graph.hpp"
#include "transgcr/sim.hpp"
#include "transgcr/solver.hpp"
#include "transgcr/transfer.hpp"

namespace {

using namespace transgcr;

Dataset domain(std::size_t n, std::size_t d, std::uint64_t seed) {
  ScenarioConfig c;
  c.d = d;
  c.s = 5;
  const Truth t = build_truth(c);
  return gen_domain(GraphSpec::er(10.0 / static_cast<double>(n)), t.target, n, 1, seed);
}

void BM_Normalize(benchmark::State& state) {
  const Graph g = gen_er(static_cast<std::size_t>(state.range(0)), 10.0 / static_cast<double>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(NormalizedAdjacency(g));
}
BENCHMARK(BM_Normalize)->Arg(1000)->Arg(10000);

void BM_Propagate(benchmark::State& state) {
  const Dataset ds = domain(static_cast<std::size_t>(state.range(0)), 100, 2);
  const NormalizedAdjacency s(ds.graph);
  for (auto _ : state) benchmark::DoNotOptimize(propagate(s, ds.features, 2));
}
BENCHMARK(BM_Propagate)->Arg(1000)->Arg(10000);

void BM_Fit(benchmark::State& state) {
  const Dataset ds = domain(static_cast<std::size_t>(state.range(0)), 100, 3);
  const PropagatedDomain p = propagate_domain(ds, 1);
  FitConfig c;
  c.lambda = scaled_lambda(0.2, static_cast<double>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(fit(p.z, p.labels, p.mask, c));
}
BENCHMARK(BM_Fit)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_TransGcr(benchmark::State& state) {
  const Dataset target = domain(200, 100, 4);
  std::vector<Dataset> sources;
  for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(state.range(0)); ++k)
    sources.push_back(domain(400, 100, 10 + k));
  TransferConfig c;
  c.lambda_beta = scaled_lambda(0.2, 400.0 * static_cast<double>(sources.size()), 100);
  c.lambda_delta = scaled_lambda(0.2, 200.0, 100);
  for (auto _ : state) benchmark::DoNotOptimize(trans_gcr(target, sources, c));
}
BENCHMARK(BM_TransGcr)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
