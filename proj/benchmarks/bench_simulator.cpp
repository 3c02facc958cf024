#include <benchmark/benchmark.h>

#include "abandonq/patience.hpp"
#include "abandonq/primitives.hpp"
#include "abandonq/scaling.hpp"
#include "abandonq/simulator.hpp"

using namespace abq;

namespace {

SimConfig base_config(std::int64_t arrivals, std::int64_t n) {
  SimConfig cfg;
  cfg.u_spec = PrimitiveSpec::exponential();
  cfg.v_spec = PrimitiveSpec::exponential();
  cfg.params = HeavyTrafficParams(1.0, 0.0, n);
  cfg.patience = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  cfg.num_arrivals = arrivals;
  cfg.burn_in_arrivals = arrivals / 10;
  cfg.moment_orders = {1.0, 2.0};
  cfg.seed = 7;
  return cfg;
}

void BM_SimulateLinearHazard(benchmark::State& state) {
  const std::int64_t arrivals = state.range(0);
  SimConfig cfg = base_config(arrivals, 100);
  for (auto _ : state) {
    SimResult r = simulate(cfg);
    benchmark::DoNotOptimize(r.scaled_moments[0].value);
    ++cfg.seed;  // fresh stream each repetition
  }
  state.SetItemsProcessed(state.iterations() * arrivals);
}
BENCHMARK(BM_SimulateLinearHazard)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_SimulateNoAbandon(benchmark::State& state) {
  const std::int64_t arrivals = state.range(0);
  SimConfig cfg = base_config(arrivals, 1);
  cfg.params = HeavyTrafficParams(1.0, -0.25, 1);
  cfg.patience = PatienceFamily::none();
  for (auto _ : state) {
    SimResult r = simulate(cfg);
    benchmark::DoNotOptimize(r.scaled_moments[0].value);
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() * arrivals);
}
BENCHMARK(BM_SimulateNoAbandon)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_SimulateCoupled(benchmark::State& state) {
  const std::int64_t arrivals = state.range(0);
  SimConfig cfg = base_config(arrivals, 4);
  DominatingFamily dom = DominatingFamily::make(cfg.patience, 0.0, 1.0, 0.3, 50.0);
  for (auto _ : state) {
    CoupledResult r = simulate_coupled(cfg, dom);
    benchmark::DoNotOptimize(r.max_violation);
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() * arrivals);
}
BENCHMARK(BM_SimulateCoupled)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_CdfGridAccumulation(benchmark::State& state) {
  SimConfig cfg = base_config(200000, 100);
  cfg.cdf_grid.clear();
  for (int i = 0; i <= 100; ++i) cfg.cdf_grid.push_back(0.05 * i);
  for (auto _ : state) {
    SimResult r = simulate(cfg);
    benchmark::DoNotOptimize(r.scaled_cdf[0]);
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() * cfg.num_arrivals);
}
BENCHMARK(BM_CdfGridAccumulation)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
