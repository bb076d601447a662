#include <memory>

#include <benchmark/benchmark.h>

#include "storagessm/equilibrium.hpp"
#include "storagessm/kalman.hpp"
#include "storagessm/particle_filter.hpp"
#include "storagessm/ssm.hpp"

using namespace storagessm;

namespace {

ModelParams base_params() {
  ModelParams p;
  p.v = 0.097;
  p.delta = 0.011;
  p.b = 0.42;
  return p;
}

void BM_SolveEquilibrium(benchmark::State& state) {
  SolverConfig c;
  c.grid_size = static_cast<std::size_t>(state.range(0));
  c.quad_nodes = static_cast<std::size_t>(state.range(1));
  const ModelParams p = base_params();
  for (auto _ : state) benchmark::DoNotOptimize(solve_equilibrium(p, c).x_star());
}
BENCHMARK(BM_SolveEquilibrium)->Args({40, 32})->Args({200, 128})->Unit(benchmark::kMillisecond);

// Storage-model filter at the sampler's default resolution; T = 360 monthly
// observations.
void BM_StorageBpf(benchmark::State& state) {
  const ModelParams p = base_params();
  const auto sol = std::make_shared<const EquilibriumSolution>(solve_equilibrium(p));
  const auto prices = simulate(p, *sol, 360, 500, 1).series();
  const StorageSsm model(sol);
  FilterOptions o;
  o.particles = static_cast<std::size_t>(state.range(0));
  o.diagnostics = false;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    o.seed = ++seed;
    benchmark::DoNotOptimize(bpf(model, prices, o).log_lik);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 360);
}
BENCHMARK(BM_StorageBpf)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KalmanLoglik(benchmark::State& state) {
  const LgllParams lp{0.42, 0.097};
  const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, 360, 1));
  for (auto _ : state) benchmark::DoNotOptimize(kalman_loglik(lp, prices));
}
BENCHMARK(BM_KalmanLoglik);

}  // namespace

BENCHMARK_MAIN();
