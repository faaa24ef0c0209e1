// Serial reference kernels against the fast and OpenMP paths.

#include <benchmark/benchmark.h>

#include <vector>

#include "mfc/estimators.hpp"
#include "mfc/meanfield.hpp"

using namespace mfc;

namespace {

std::vector<double> followers(std::size_t n) { return sample_von_mises_mixture(SeedSpec{7}, n); }

void BM_DriftReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ModelParams p;
  p.n_followers = n;
  const auto x = followers(n);
  std::vector<double> out(n);
  for (auto _ : state) {
    hk_drift_all_reference(x, 0.8, p, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_DriftWindowed(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ModelParams p;
  p.n_followers = n;
  const auto x = followers(n);
  std::vector<double> out(n);
  DriftWorkspace ws;
  for (auto _ : state) {
    ws.hk_drift_all(x, 0.8, p, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void run_batch(benchmark::State& state, Execution exec) {
  ModelParams p;
  SystemState s;
  s.followers = followers(p.n_followers);
  s.leader = 0.8;
  const HkControlProblem prob(p, TimeGrid::with_step(1.0, 0.01), s);
  const auto c = PiecewiseConstantControl::uniform(1.0, 5, 0.2);
  const auto paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto batch = sample_batch(prob, c, paths, SeedSpec{1}, exec);
    benchmark::DoNotOptimize(batch.phi.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(paths));
}

void BM_BatchSerial(benchmark::State& state) { run_batch(state, Execution::kSerial); }
void BM_BatchParallel(benchmark::State& state) { run_batch(state, Execution::kParallel); }

void BM_FokkerPlanckStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ModelParams p;
  const auto g0 = GridDensity::from_mixture(VonMisesMixture::opinion_clusters(), n);
  std::vector<double> g(g0.values().begin(), g0.values().end());
  FokkerPlanckSolver solver(p, n);
  const double dt = 0.5 * solver.max_dt();
  for (auto _ : state) {
    solver.step(g, 0.5, dt);
    benchmark::DoNotOptimize(g.data());
  }
}

}  // namespace

BENCHMARK(BM_DriftReference)->Arg(99)->Arg(1000);
BENCHMARK(BM_DriftWindowed)->Arg(99)->Arg(1000);
BENCHMARK(BM_BatchSerial)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FokkerPlanckStep)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
