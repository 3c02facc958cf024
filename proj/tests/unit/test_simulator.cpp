#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "abandonq/rng.hpp"
#include "abandonq/simulator.hpp"

using namespace abq;

TEST_CASE("single-arrival transition: jump on survival, tie abandons") {
  StepResult r = step(1.0, 0.5, 2.0, 3.0);  // 1.0 < 3.0: customer joins
  CHECK(!r.abandoned);
  CHECK(r.v_post == doctest::Approx(3.0));
  CHECK(r.v_next_pre == doctest::Approx(2.5));

  StepResult tie = step(1.0, 0.5, 2.0, 1.0);  // offered wait equals patience: leave
  CHECK(tie.abandoned);
  CHECK(tie.v_post == doctest::Approx(1.0));
  CHECK(tie.v_next_pre == doctest::Approx(0.5));

  StepResult drain = step(0.3, 1.0, 2.0, 0.1);
  CHECK(drain.abandoned);
  CHECK(drain.v_next_pre == doctest::Approx(0.0));  // floored at zero
}

TEST_CASE("segment accumulation closed forms") {
  std::vector<double> orders = {1.0, 2.0};
  std::vector<double> grid = {0.5, 1.0, 2.5};
  SegmentStats s = accumulate_segment(2.0, 3.0, orders, grid);
  // workload drains 2 -> 0 at t=2, stays 0 until t=3
  CHECK(s.moment_integrals[0] == doctest::Approx(2.0).epsilon(1e-14));        // 2^2/2
  CHECK(s.moment_integrals[1] == doctest::Approx(8.0 / 3.0).epsilon(1e-14));  // 2^3/3
  CHECK(s.time_below[0] == doctest::Approx(1.5));  // below 0.5 once w >= 1.5
  CHECK(s.time_below[1] == doctest::Approx(2.0));
  CHECK(s.time_below[2] == doctest::Approx(3.0));

  // duration shorter than the drain: integral of (5 - w) on [0, 2]
  SegmentStats t = accumulate_segment(5.0, 2.0, orders, grid);
  CHECK(t.moment_integrals[0] == doctest::Approx(8.0).epsilon(1e-14));  // (25 - 9)/2
  CHECK(t.time_below[2] == doctest::Approx(0.0));

  CHECK_THROWS_AS(accumulate_segment(-1.0, 1.0, orders, grid), ConfigError);
  CHECK_THROWS_AS(accumulate_segment(1.0, -1.0, orders, grid), ConfigError);
}

namespace {

// Independent re-implementation of the offered-waiting-time recursion and its
// time integrals, sharing only the primitive samplers and the patience
// quantile transform (each has its own closed-form tests).  Everything else —
// stream discipline, the Lindley-with-abandonment recursion, the piecewise
// integration — is recomputed from scratch.
struct OracleRun {
  double total_time = 0.0;     // measured span, starting at the first arrival
  double integral_v = 0.0;     // int V dt over the span
  double integral_v2 = 0.0;
  std::int64_t abandoned = 0;
  double v_final = 0.0;        // workload after the last drain
  double sum_pre = 0.0;        // sum of V(t_j-)
};

OracleRun lindley_oracle(const SimConfig& cfg) {
  OracleRun o;
  Rng ru(derive_seed(cfg.seed, 1));
  Rng rv(derive_seed(cfg.seed, 2));
  Rng rd(derive_seed(cfg.seed, 3));
  double ia_scale = cfg.params.interarrival_scale();
  double sv_scale = cfg.params.service_scale();
  double tau0 = cfg.u_spec.sample(ru) * ia_scale;
  double v = std::max(0.0 - tau0, 0.0);  // empty start, drains before arrival 1
  for (std::int64_t j = 1; j <= cfg.num_arrivals; ++j) {
    double service = cfg.v_spec.sample(rv) * sv_scale;
    double d = cfg.patience.sample(cfg.params.n, rd);
    bool abandon = v >= d;
    o.sum_pre += v;
    if (abandon) ++o.abandoned;
    double post = abandon ? v : v + service;
    double u_next = cfg.u_spec.sample(ru) * ia_scale;
    o.total_time += u_next;
    double lo = std::max(post - u_next, 0.0);
    o.integral_v += (post * post - lo * lo) / 2.0;
    o.integral_v2 += (post * post * post - lo * lo * lo) / 3.0;
    v = lo;
  }
  o.v_final = v;
  return o;
}

SimConfig oracle_config(std::int64_t n, double theta, PatienceFamily fam, std::int64_t arrivals,
                        std::uint64_t seed) {
  SimConfig cfg;
  cfg.u_spec = PrimitiveSpec::exponential();
  cfg.v_spec = PrimitiveSpec::exponential();
  cfg.patience = std::move(fam);
  cfg.params = HeavyTrafficParams{1.0, theta, n};
  cfg.num_arrivals = arrivals;
  cfg.burn_in_arrivals = 0;  // measure from the first arrival
  cfg.num_batches = 2;
  cfg.moment_orders = {1.0, 2.0};
  cfg.cdf_grid = {0.5, 1.0, 5.0};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("simulator agrees with an independent recursion, no abandonment") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 100000, 424242);
  SimResult r = simulate(cfg);
  OracleRun o = lindley_oracle(cfg);

  CHECK(r.abandoned_count == o.abandoned);
  CHECK(r.abandoned_count == 0);
  // n = 1 so workload units and drain-scaled units coincide
  CHECK(r.total_time_w == doctest::Approx(o.total_time).epsilon(1e-10));
  CHECK(r.moment_integrals_w[0] == doctest::Approx(o.integral_v).epsilon(1e-10));
  CHECK(r.moment_integrals_w[1] == doctest::Approx(o.integral_v2).epsilon(1e-10));
  CHECK(r.scaled_moments[0].value == doctest::Approx(o.integral_v / o.total_time).epsilon(1e-10));
  CHECK(r.diag.v_final == doctest::Approx(o.v_final).epsilon(1e-12));
}

TEST_CASE("simulator agrees with an independent recursion, with abandonment") {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  SimConfig cfg = oracle_config(100, 0.0, fam, 100000, 90210);
  SimResult r = simulate(cfg);
  OracleRun o = lindley_oracle(cfg);

  CHECK(r.abandoned_count == o.abandoned);
  CHECK(r.abandoned_count > 0);  // the scenario does abandon
  CHECK(r.total_time_w == doctest::Approx(10.0 * o.total_time).epsilon(1e-10));
  CHECK(r.moment_integrals_w[0] == doctest::Approx(100.0 * o.integral_v).epsilon(1e-10));
  CHECK(r.diag.v_final == doctest::Approx(o.v_final).epsilon(1e-12));
  // arrival-epoch first moment: mean of sqrt(n) V(t_j-)
  CHECK(r.arrival_moments[0] ==
        doctest::Approx(10.0 * o.sum_pre / cfg.num_arrivals).epsilon(1e-10));
}

TEST_CASE("workload accounting identity") {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  SimConfig cfg = oracle_config(25, 0.5, fam, 50000, 7);
  SimResult r = simulate(cfg);
  // everything that entered minus everything served must equal the final level
  double recon = r.diag.v_initial + r.diag.accepted_work - r.diag.busy_time;
  CHECK(r.diag.v_final == doctest::Approx(recon).epsilon(1e-9));
  CHECK(r.diag.busy_time + r.diag.idle_time == doctest::Approx(r.diag.elapsed).epsilon(1e-9));
}

TEST_CASE("M/M/1 oracle: time-averaged workload matches rho/(mu - lambda)") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 2000000, 1234);
  cfg.burn_in_arrivals = -1;  // default burn-in
  cfg.num_batches = 32;
  SimResult r = simulate(cfg);
  // lambda = 1, mu = 1.25: E[V] = rho / (mu - lambda) = 3.2
  CHECK(std::abs(r.scaled_moments[0].value - 3.2) <= r.scaled_moments[0].ci_half);
  CHECK(r.scaled_moments[0].ci_half > 0.0);
  CHECK(r.scaled_moments[0].ci_half < 0.3);
  CHECK(r.abandon_fraction.value == 0.0);
}

TEST_CASE("bitwise reproducibility for equal seeds, divergence otherwise") {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  SimConfig cfg = oracle_config(25, 0.0, fam, 30000, 5150);
  SimResult a = simulate(cfg);
  SimResult b = simulate(cfg);
  CHECK(a.scaled_moments[0].value == b.scaled_moments[0].value);
  CHECK(a.scaled_moments[1].value == b.scaled_moments[1].value);
  CHECK(a.abandon_fraction.value == b.abandon_fraction.value);
  CHECK(a.total_time_w == b.total_time_w);
  REQUIRE(a.batches.size() == b.batches.size());
  for (std::size_t i = 0; i < a.batches.size(); ++i) {
    CHECK(a.batches[i].time_w == b.batches[i].time_w);
  }
  cfg.seed = 5151;
  SimResult c = simulate(cfg);
  CHECK(a.scaled_moments[0].value != c.scaled_moments[0].value);
}

TEST_CASE("burn-in resolution and batch partition") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 100, 1);
  cfg.burn_in_arrivals = -1;
  // default max(N/10, 1e4) would exceed N; capped at N/2
  CHECK(cfg.resolved_burn_in() == 50);

  SimConfig big = oracle_config(1, -0.25, PatienceFamily::none(), 1000000, 1);
  big.burn_in_arrivals = -1;
  CHECK(big.resolved_burn_in() == 100000);

  SimConfig part = oracle_config(1, -0.25, PatienceFamily::none(), 1000, 1);
  part.burn_in_arrivals = 100;
  part.num_batches = 32;
  CHECK(part.batch_size() == 28);     // (1000 - 100) / 32
  CHECK(part.arrivals_used() == 896);  // 28 * 32, remainder dropped
  SimResult r = simulate(part);
  REQUIRE(r.batches.size() == 32);
  for (const BatchRecord& b : r.batches) CHECK(b.arrivals == 28);
  CHECK(r.arrivals_used == 896);
}

TEST_CASE("config validation rejects nonsense") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 1000, 1);
  CHECK_NOTHROW(cfg.validate());
  SimConfig bad = cfg;
  bad.num_arrivals = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.burn_in_arrivals = 1000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.num_batches = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.moment_orders = {0.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.cdf_grid = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.num_arrivals = 100;
  bad.burn_in_arrivals = 99;  // leaves fewer arrivals than batches
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero service keeps the workload at zero") {
  SimConfig cfg;
  cfg.u_spec = PrimitiveSpec::exponential();
  cfg.v_spec = PrimitiveSpec::degenerate(0.0);
  cfg.patience = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  cfg.params = HeavyTrafficParams{1.0, 0.0, 4};
  cfg.num_arrivals = 20000;
  cfg.burn_in_arrivals = 0;
  cfg.num_batches = 4;
  cfg.moment_orders = {1.0};
  cfg.cdf_grid = {0.0, 1.0};
  cfg.seed = 33;
  SimResult r = simulate(cfg);
  CHECK(r.scaled_moments[0].value == 0.0);
  CHECK(r.abandoned_count == 0);  // patience is a.s. positive, offered wait is 0
  CHECK(r.scaled_cdf[0] == doctest::Approx(1.0));  // all time spent at zero
  CHECK(r.scaled_cdf[1] == doctest::Approx(1.0));
}

TEST_CASE("initial state is honored and reported") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 1000, 9);
  cfg.initial_state = std::make_pair(0.5, 2.0);  // first arrival at 0.5, workload 2
  SimResult r = simulate(cfg);
  CHECK(r.diag.v_initial == doctest::Approx(2.0));
  CHECK(r.diag.elapsed > 0.5);
}

TEST_CASE("event dump writes one row per arrival") {
  SimConfig cfg = oracle_config(1, -0.25, PatienceFamily::none(), 100, 77);
  std::string path = "/tmp/abandonq_test_dump.csv";
  cfg.path_dump = path;
  simulate(cfg);
  std::ifstream f(path);
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  CHECK(line == "event_time,v_pre,v_post,abandoned");
  int rows = 0;
  while (std::getline(f, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 100);
  std::filesystem::remove(path);
}

TEST_CASE("pooling replications: order-insensitive, associative estimates") {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  SimConfig cfg = oracle_config(25, 0.0, fam, 40000, 1001);
  cfg.burn_in_arrivals = 4000;
  SimResult a = simulate(cfg);
  cfg.seed = 1002;
  SimResult b = simulate(cfg);
  cfg.seed = 1003;
  SimResult c = simulate(cfg);

  SimResult ab = merge(a, b);
  SimResult ba = merge(b, a);
  CHECK(ab.scaled_moments[0].value ==
        doctest::Approx(ba.scaled_moments[0].value).epsilon(1e-12));
  CHECK(ab.scaled_moments[0].ci_half ==
        doctest::Approx(ba.scaled_moments[0].ci_half).epsilon(1e-12));
  CHECK(ab.abandon_fraction.value ==
        doctest::Approx(ba.abandon_fraction.value).epsilon(1e-12));
  CHECK(ab.merged);

  SimResult abc1 = merge(merge(a, b), c);
  SimResult abc2 = merge(a, merge(b, c));
  CHECK(abc1.scaled_moments[1].value ==
        doctest::Approx(abc2.scaled_moments[1].value).epsilon(1e-12));
  CHECK(abc1.arrivals_used == abc2.arrivals_used);
  CHECK(abc1.batches.size() == a.batches.size() * 3);

  // the pooled mean must lie between the replication means
  double lo = std::min(a.scaled_moments[0].value, b.scaled_moments[0].value);
  double hi = std::max(a.scaled_moments[0].value, b.scaled_moments[0].value);
  CHECK(ab.scaled_moments[0].value >= lo);
  CHECK(ab.scaled_moments[0].value <= hi);

  SimConfig other = cfg;
  other.cdf_grid = {0.1, 0.2};
  SimResult d = simulate(other);
  CHECK_THROWS_AS(merge(a, d), ConfigError);
}

TEST_CASE("direct and plug-in abandonment estimators agree") {
  PatienceFamily fam = PatienceFamily::hazard_scaled(HazardFn::poly({1.0}));
  SimConfig cfg = oracle_config(100, 0.0, fam, 2000000, 20240817);
  cfg.burn_in_arrivals = 100000;
  cfg.num_batches = 32;
  SimResult r = simulate(cfg);
  CHECK(r.abandon_fraction.value > 0.0);
  // conditional-expectation smoothing: same target, so 10% relative agreement
  // at this sample size is conservative
  CHECK(r.plug_in_abandon ==
        doctest::Approx(r.abandon_fraction.value).epsilon(0.10));
}
