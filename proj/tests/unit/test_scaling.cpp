#include <cmath>
#include <vector>

#include <doctest.h>

#include "abandonq/rng.hpp"
#include "abandonq/scaling.hpp"
#include "abandonq/simulator.hpp"

using namespace abq;

namespace {

PatienceFamily linear_hazard() { return PatienceFamily::hazard_scaled(HazardFn::poly({1.0})); }

}  // namespace

TEST_CASE("dominating family construction and cap arithmetic") {
  // stability margin at x_max = 50 is 50 - 0 = 50, default sigma_bar is half
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0);
  CHECK(dom.sigma_bar() == doctest::Approx(25.0));
  CHECK(dom.cap_level() == doctest::Approx(25.0));

  DominatingFamily tight = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.3);
  CHECK(tight.cap_level() == doctest::Approx(0.3));
  CHECK(tight.cap_mass(4) == doctest::Approx(0.15));
  CHECK(tight.cap_mass(1000000) == doctest::Approx(0.0003));
  CHECK(tight.cap_mass(1) == doctest::Approx(0.3));

  // explicit sigma_bar must be positive
  CHECK_THROWS_AS(DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(DominatingFamily::make(linear_hazard(), 0.0, 1.0, -1.0), ConfigError);
  // default sigma_bar needs a positive stability margin
  CHECK_THROWS_AS(DominatingFamily::make(linear_hazard(), 60.0, 1.0), ConfigError);
}

TEST_CASE("negative cap level: the dominating system never abandons") {
  DominatingFamily dom = DominatingFamily::make(PatienceFamily::none(), -1.0, 1.0, 0.5);
  CHECK(dom.cap_level() == doctest::Approx(-0.5));
  CHECK(dom.cap_mass(100) == 0.0);
  CHECK(std::isinf(dom.couple(100, 0.7)));
  CHECK(std::isinf(dom.couple(100, 0.0)));
}

TEST_CASE("coupling map: longer patience, truncated law") {
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.3);
  const std::int64_t n = 4;
  const double cap = 0.15;  // cap_level / sqrt(n)
  PatienceFamily base = linear_hazard();

  // the threshold below which patience draws survive untouched
  double thresh = base.quantile(n, cap);
  CHECK(base.cdf(n, thresh) == doctest::Approx(cap).epsilon(1e-9));

  Rng rng(2024);
  std::int64_t finite = 0;
  const int N = 1000000;
  std::int64_t below_probe = 0;
  double probe = base.quantile(n, 0.10);
  for (int i = 0; i < N; ++i) {
    double d = base.sample(n, rng);
    double dstar = dom.couple(n, d);
    REQUIRE(dstar >= d);  // domination, pathwise and deterministic
    if (!std::isinf(dstar)) {
      ++finite;
      if (dstar <= probe) ++below_probe;
    }
  }
  // P(d* finite) = cap; binomial 4-sigma band
  double se = std::sqrt(cap * (1.0 - cap) / N);
  CHECK(std::abs(static_cast<double>(finite) / N - cap) <= 4.0 * se);
  // on {d* finite}, the law below the cap is the base law: P(d* <= probe) = 0.10
  double se2 = std::sqrt(0.10 * 0.90 / N);
  CHECK(std::abs(static_cast<double>(below_probe) / N - 0.10) <= 4.0 * se2);
}

TEST_CASE("dominating cdf is the truncated base cdf") {
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.3);
  const std::int64_t n = 4;
  PatienceFamily base = linear_hazard();
  double cap = 0.15;
  for (double x : {0.01, 0.05, 0.1, 0.5, 2.0, 10.0}) {
    double expect = std::min(base.cdf(n, x), cap);
    CHECK(dom.cdf(n, x) == doctest::Approx(expect).epsilon(1e-12));
  }
}

namespace {

SimConfig coupled_config(std::int64_t n, std::int64_t arrivals, std::uint64_t seed) {
  SimConfig cfg;
  cfg.u_spec = PrimitiveSpec::exponential();
  cfg.v_spec = PrimitiveSpec::exponential();
  cfg.patience = linear_hazard();
  cfg.params = HeavyTrafficParams{1.0, 0.0, n};
  cfg.num_arrivals = arrivals;
  cfg.burn_in_arrivals = 0;
  cfg.num_batches = 2;
  cfg.moment_orders = {1.0};
  cfg.cdf_grid = {0.5};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("identity coupling reproduces the base path bitwise") {
  // a huge cap never truncates, so d* = d and the two systems coincide
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 1000.0);
  SimConfig cfg = coupled_config(4, 50000, 11);
  CoupledResult r = simulate_coupled(cfg, dom);
  CHECK(r.base.scaled_moments[0].value == r.dominating.scaled_moments[0].value);
  CHECK(r.base.abandoned_count == r.dominating.abandoned_count);
  CHECK(r.max_violation <= 0.0);
}

TEST_CASE("never-abandoning dominating path stays above the base path") {
  DominatingFamily dom = DominatingFamily::make(PatienceFamily::none(), -1.0, 1.0, 0.5);
  SimConfig cfg = coupled_config(4, 50000, 12);
  CHECK(dom.cap_mass(4) == 0.0);
  CoupledResult r = simulate_coupled(cfg, dom);
  CHECK(r.dominating.abandoned_count == 0);
  CHECK(r.base.abandoned_count > 0);
  CHECK(r.max_violation <= 1e-12);
  // more work is retained upstairs
  CHECK(r.dominating.scaled_moments[0].value >= r.base.scaled_moments[0].value);
}

TEST_CASE("capped coupling respects the domination inequality") {
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.3);
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    SimConfig cfg = coupled_config(4, 100000, seed);
    CoupledResult r = simulate_coupled(cfg, dom);
    CHECK(r.max_violation <= 1e-12);
    // the dominating system abandons less
    CHECK(r.dominating.abandoned_count <= r.base.abandoned_count);
  }
}

TEST_CASE("coupled base path equals the plain simulation") {
  DominatingFamily dom = DominatingFamily::make(linear_hazard(), 0.0, 1.0, 0.3);
  SimConfig cfg = coupled_config(4, 30000, 31);
  CoupledResult r = simulate_coupled(cfg, dom);
  SimResult plain = simulate(cfg);
  CHECK(r.base.scaled_moments[0].value == plain.scaled_moments[0].value);
  CHECK(r.base.abandoned_count == plain.abandoned_count);
  CHECK(r.base.total_time_w == plain.total_time_w);
}
