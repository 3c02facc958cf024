#include <benchmark/benchmark.h>

#include "abandonq/patience.hpp"
#include "abandonq/rng.hpp"

using namespace abq;

namespace {

void BM_HazardScaledSample(benchmark::State& state) {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0, 0.5}));
  Rng rng(42);
  double acc = 0.0;
  for (auto _ : state) acc += fam.sample(100, rng);
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HazardScaledSample);

void BM_CappedLimitSample(benchmark::State& state) {
  PatienceFamily fam = PatienceFamily::capped_limit(LimitFn::poly({0.0, 1.0, 0.25}));
  Rng rng(42);
  double acc = 0.0;
  for (auto _ : state) acc += fam.sample(100, rng);
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CappedLimitSample);

void BM_TableSample(benchmark::State& state) {
  Table t;
  for (int i = 0; i <= 64; ++i) {
    t.x.push_back(0.25 * i);
    t.y.push_back(1.0 - std::exp(-0.25 * i));
  }
  t.y.back() = 1.0;
  PatienceFamily fam = PatienceFamily::external_table(t);
  Rng rng(42);
  double acc = 0.0;
  for (auto _ : state) acc += fam.sample(100, rng);
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TableSample);

void BM_ScaledCdf(benchmark::State& state) {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  double x = 0.0, acc = 0.0;
  for (auto _ : state) {
    acc += fam.scaled_cdf(1000000, x);
    x += 1e-4;
    if (x > 5.0) x = 0.0;
  }
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScaledCdf);

void BM_ScalingLimitAudit(benchmark::State& state) {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0, 0.5}));
  for (auto _ : state) {
    ScalingLimitReport rep = check_scaling_limit(fam, 50.0, {100, 10000, 1000000});
    benchmark::DoNotOptimize(rep.sup_error[0]);
  }
}
BENCHMARK(BM_ScalingLimitAudit)->Unit(benchmark::kMillisecond);

}  // namespace
