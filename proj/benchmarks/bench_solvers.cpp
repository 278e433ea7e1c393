#include <benchmark/benchmark.h>

#include <random>

#include "bidro/bilevel.hpp"
#include "bidro/experiments.hpp"
#include "bidro/lp.hpp"
#include "bidro/scenario.hpp"

using namespace bidro;

static void BM_DenseLp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  LinearProgram lp(n, n);
  for (int j = 0; j < n; ++j) {
    lp.objective[j] = -u(rng);
    lp.lower[j] = 0.0;
    lp.upper[j] = kInf;
  }
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < n; ++j) lp.at(r, j) = u(rng);
    lp.senses[r] = RowSense::LessEqual;
    lp.rhs[r] = 1.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp(lp).objective);
}
BENCHMARK(BM_DenseLp)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_SolveRing(benchmark::State& state) {
  ScenarioSpec spec;
  spec.topology = Topology::Ring;
  spec.ring_nodes = static_cast<int>(state.range(0));
  const NetworkInstance inst = gen_instance(spec);
  const AmbiguitySet amb = make_experiment_ambiguity(
      inst, sample_demands(demand_model(inst), 50, 1), 0.1, MetricScaling::Normalized);
  SolverConfig cfg;
  cfg.tolerance = 1e-4;
  cfg.max_iters = 300;
  for (auto _ : state) benchmark::DoNotOptimize(solve(inst, amb, cfg).objective);
}
BENCHMARK(BM_SolveRing)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
