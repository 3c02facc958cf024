#include <cmath>
#include <vector>

#include <doctest.h>

#include "abandonq/diffusion.hpp"

using namespace abq;

TEST_CASE("exponential stationary law: every closed form to 1e-10") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = -1.0;
  model.H = LimitFn::zero();
  DiffusionStationary stat = build_stationary(model, 1e-10);
  // density 2 e^{-2x}
  CHECK(stat.norm_const() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(stat.density(0.0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(stat.density(1.0) == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-10));
  CHECK(stat.moment(1.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(stat.moment(2.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(stat.cdf(0.5) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(stat.quantile(0.5) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-9));
  CHECK(stat.expect_limit() == doctest::Approx(0.0));
  CHECK(stat.drift_at_cut() == doctest::Approx(-1.0));
}

TEST_CASE("half-normal stationary law: Gaussian-integral oracles") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = 0.0;
  model.H = LimitFn::linear(1.0);
  DiffusionStationary stat = build_stationary(model, 1e-10);
  // density prop to e^{-x^2}: M = 2/sqrt(pi), mean 1/sqrt(pi), E[V^2] = 1/2
  CHECK(stat.norm_const() == doctest::Approx(2.0 / std::sqrt(M_PI)).epsilon(1e-10));
  CHECK(stat.moment(1.0) == doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-10));
  CHECK(stat.moment(2.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(stat.expect_limit() == doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-10));
  // cdf(x) = erf(x)
  CHECK(stat.cdf(0.7) == doctest::Approx(std::erf(0.7)).epsilon(1e-10));
  CHECK(stat.quantile(std::erf(0.7)) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("model assembly from primitives") {
  DiffusionModel m = DiffusionModel::from_primitives(
      PrimitiveSpec::exponential(), PrimitiveSpec::exponential(), 2.0, 1.0, LimitFn::linear(1.0));
  CHECK(m.sigma2 == doctest::Approx(1.0));       // (1 + 1) / lambda
  CHECK(m.drift_const == doctest::Approx(0.5));  // theta / lambda
  CHECK(m.drift(0.25) == doctest::Approx(0.25));
  CHECK(m.drift(2.0) == doctest::Approx(-1.5));
  // log unnormalized density: (2 / sigma2)(c x - x^2 / 2)
  CHECK(m.log_density_unnorm(1.0) == doctest::Approx(2.0 * (0.5 - 0.5)).epsilon(1e-12));
  CHECK(m.log_density_unnorm(2.0) == doctest::Approx(2.0 * (1.0 - 2.0)).epsilon(1e-12));
}

TEST_CASE("brute-force oracle: cubic-potential model") {
  // H(x) = x^2, drift constant 0.5, sigma^2 = 1:
  // l(x) = 2 (0.5 x - x^3 / 3) = x - 2 x^3 / 3
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = 0.5;
  model.H = LimitFn::poly({0.0, 0.0, 1.0});
  DiffusionStationary stat = build_stationary(model, 1e-10);

  // independent oracle: composite Simpson with 10^7 panels on [0, 12] (the
  // integrand underflows long before 12)
  auto ell = [](double x) { return x - 2.0 * x * x * x / 3.0; };
  const int panels = 10000000;
  const double hi = 12.0, h = hi / panels;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, sH = 0.0;
  for (int i = 0; i <= panels; ++i) {
    double x = i * h;
    double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    double f = w * std::exp(ell(x));
    s0 += f;
    s1 += f * x;
    s2 += f * x * x;
    sH += f * x * x;  // H(x) = x^2 here
  }
  double mass = s0 * h / 3.0;
  double mean = (s1 * h / 3.0) / mass;
  double m2 = (s2 * h / 3.0) / mass;
  double eh = (sH * h / 3.0) / mass;

  CHECK(stat.norm_const() == doctest::Approx(1.0 / mass).epsilon(1e-8));
  CHECK(stat.moment(1.0) == doctest::Approx(mean).epsilon(1e-8));
  CHECK(stat.moment(2.0) == doctest::Approx(m2).epsilon(1e-8));
  CHECK(stat.expect_limit() == doctest::Approx(eh).epsilon(1e-8));
  double med = stat.quantile(0.5);
  CHECK(stat.cdf(med) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("general expectations and fractional moments") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = -1.0;
  model.H = LimitFn::zero();
  DiffusionStationary stat = build_stationary(model, 1e-10);
  // E[e^{-V}] for V ~ Exp(2) is 2/3
  double lap = stat.expect([](double x) { return std::exp(-x); });
  CHECK(lap == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  // E[V^{1/2}] = Gamma(1.5) / 2^{1/2}
  CHECK(stat.moment(0.5) ==
        doctest::Approx(std::tgamma(1.5) / std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("stationary construction rejects bad inputs") {
  DiffusionModel model;
  model.sigma2 = 0.0;
  model.H = LimitFn::zero();
  model.drift_const = -1.0;
  CHECK_THROWS_AS(build_stationary(model, 1e-10), ConfigError);
  model.sigma2 = 1.0;
  CHECK_THROWS_AS(build_stationary(model, 0.5), ConfigError);  // tol too loose
  model.H = LimitFn::undefined();
  CHECK_THROWS_AS(build_stationary(model, 1e-10), ConfigError);
}

TEST_CASE("unstable drift is detected, not looped on") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = 1.0;  // pushes up forever, H stays zero
  model.H = LimitFn::zero();
  CHECK_THROWS_AS(build_stationary(model, 1e-10), StabilityError);
}

TEST_CASE("tail certificate: truncation error is inside tolerance") {
  DiffusionModel model;
  model.sigma2 = 2.0;
  model.drift_const = 0.0;
  model.H = LimitFn::linear(1.0);
  DiffusionStationary stat = build_stationary(model, 1e-10);
  CHECK(stat.tail_bound_rel() <= 1e-10);
  CHECK(stat.drift_at_cut() < 0.0);
  CHECK(stat.cdf(stat.x_cut()) == doctest::Approx(1.0).epsilon(1e-9));
  // density integrates to one on [0, x_cut]
  double mass = stat.expect([](double) { return 1.0; });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("euler scheme approaches the quadrature answer") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = -1.0;
  model.H = LimitFn::zero();
  DiffusionStationary stat = build_stationary(model, 1e-10);

  SdeConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 20000.0;
  cfg.burn_in = 100.0;
  cfg.seed = 7;
  cfg.moment_orders = {1.0, 2.0};
  SdeResult r = simulate_sde(model, cfg);
  double bias_allow = std::sqrt(model.sigma2) * std::sqrt(cfg.dt);
  CHECK(std::abs(r.moments[0].value - stat.moment(1.0)) <=
        3.0 * r.moments[0].std_error + bias_allow);
  CHECK(std::abs(r.moments[1].value - stat.moment(2.0)) <=
        3.0 * r.moments[1].std_error + 2.0 * bias_allow);
  CHECK(r.total_reflection > 0.0);
  // reflection happens only near zero: the average workload at reflection
  // events is of the order sigma sqrt(dt)
  CHECK(r.complementarity <= 2.0 * std::sqrt(model.sigma2 * cfg.dt));
  CHECK(r.complementarity >= 0.0);

  SdeResult again = simulate_sde(model, cfg);
  CHECK(again.moments[0].value == r.moments[0].value);  // deterministic
}

TEST_CASE("euler scheme input validation") {
  DiffusionModel model;
  model.sigma2 = 1.0;
  model.drift_const = -1.0;
  model.H = LimitFn::zero();
  SdeConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(simulate_sde(model, cfg), ConfigError);
  cfg.dt = 1e-3;
  cfg.burn_in = 2e5;  // exceeds t_end
  CHECK_THROWS_AS(simulate_sde(model, cfg), ConfigError);
}
