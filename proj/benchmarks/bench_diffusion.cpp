#include <benchmark/benchmark.h>

#include "abandonq/diffusion.hpp"

using namespace abq;

namespace {

DiffusionModel half_normal() {
  DiffusionModel m;
  m.sigma2 = 1.0;
  m.drift_const = 0.0;
  m.H = LimitFn::linear(1.0);
  return m;
}

void BM_BuildStationary(benchmark::State& state) {
  DiffusionModel m = half_normal();
  for (auto _ : state) {
    DiffusionStationary stat = build_stationary(m, 1e-10);
    benchmark::DoNotOptimize(stat.norm_const());
  }
}
BENCHMARK(BM_BuildStationary)->Unit(benchmark::kMicrosecond);

void BM_StationaryMoment(benchmark::State& state) {
  DiffusionStationary stat = build_stationary(half_normal(), 1e-10);
  double m = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stat.moment(m));
    m = (m == 1.0) ? 2.0 : 1.0;
  }
}
BENCHMARK(BM_StationaryMoment)->Unit(benchmark::kMicrosecond);

void BM_StationaryQuantile(benchmark::State& state) {
  DiffusionStationary stat = build_stationary(half_normal(), 1e-10);
  double q = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stat.quantile(q));
    q += 0.2;
    if (q > 0.95) q = 0.1;
  }
}
BENCHMARK(BM_StationaryQuantile)->Unit(benchmark::kMicrosecond);

void BM_SdeSteps(benchmark::State& state) {
  DiffusionModel m = half_normal();
  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 100.0;
  cfg.burn_in = 1.0;
  cfg.seed = 5;
  for (auto _ : state) {
    SdeResult r = simulate_sde(m, cfg);
    benchmark::DoNotOptimize(r.moments[0].value);
    ++cfg.seed;
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(cfg.t_end / cfg.dt));
}
BENCHMARK(BM_SdeSteps)->Unit(benchmark::kMillisecond);

}  // namespace
