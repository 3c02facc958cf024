#include <cmath>
#include <cstddef>
#include <vector>

#include <doctest.h>

#include "abandonq/quadrature.hpp"

using namespace abq;

TEST_CASE("kahan summation survives cancellation-hostile streams") {
  Kahan k;
  k.add(1e16);
  for (int i = 0; i < 10000; ++i) k.add(1.0);
  k.add(-1e16);
  CHECK(k.value() == doctest::Approx(10000.0).epsilon(1e-12));

  double naive = 1e16;
  for (int i = 0; i < 10000; ++i) naive += 1.0;
  naive -= 1e16;
  CHECK(std::abs(naive - 10000.0) > 100.0);  // the damage Kahan avoids
}

TEST_CASE("fixed 15-point rule is exact on low-degree polynomials") {
  auto poly = [](double x) { return 3.0 * x * x * x * x - 2.0 * x * x + 7.0; };
  // int_0^2 = 3*32/5 - 2*8/3 + 14 = 96/5 - 16/3 + 14
  double exact = 96.0 / 5.0 - 16.0 / 3.0 + 14.0;
  CHECK(gauss_kronrod_15(poly, 0.0, 2.0) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("adaptive gauss-kronrod meets requested relative tolerance") {
  auto f = [](double x) { return std::exp(-x) * std::sin(5.0 * x); };
  // int_0^pi e^{-x} sin(5x) dx = 5/26 * (1 - e^{-pi} cos(5 pi)) ... compute:
  // antiderivative: -e^{-x}(sin5x + 5cos5x)/26; value = (5 + e^{-pi} * 5)/26
  double exact = (5.0 + 5.0 * std::exp(-M_PI)) / 26.0;
  AdaptiveQuadResult r = adaptive_gauss_kronrod(f, 0.0, M_PI, 1e-12);
  CHECK(r.value == doctest::Approx(exact).epsilon(1e-11));
  CHECK(r.error_estimate >= std::abs(r.value - exact) / 10.0);  // estimate not wildly optimistic
}

TEST_CASE("adaptive gauss-kronrod panel list tiles the interval") {
  auto f = [](double x) { return std::exp(-x * x); };
  AdaptiveQuadResult r = adaptive_gauss_kronrod(f, 0.0, 8.0, 1e-12);
  REQUIRE(!r.panels.empty());
  CHECK(r.panels.front().a == doctest::Approx(0.0));
  CHECK(r.panels.back().b == doctest::Approx(8.0));
  double sum = 0.0;
  for (std::size_t i = 0; i < r.panels.size(); ++i) {
    if (i > 0) CHECK(r.panels[i].a == doctest::Approx(r.panels[i - 1].b).epsilon(1e-15));
    sum += r.panels[i].integral;
  }
  CHECK(sum == doctest::Approx(r.value).epsilon(1e-13));
  CHECK(r.value == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-11));
}

TEST_CASE("adaptive gauss-kronrod reports budget exhaustion") {
  auto spiky = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3141) + 1e-14); };
  CHECK_THROWS_AS(adaptive_gauss_kronrod(spiky, 0.0, 1.0, 1e-14, 0.0, 8), QuadratureError);
}

TEST_CASE("adaptive simpson matches closed forms") {
  CHECK(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(adaptive_simpson([](double x) { return x * std::sqrt(x); }, 0.0, 1.0) ==
        doctest::Approx(0.4).epsilon(1e-9));
  CHECK(adaptive_simpson([](double) { return 4.0; }, 1.5, 2.5) ==
        doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("adaptive simpson throws when the subdivision budget is gone") {
  auto f = [](double x) { return 1.0 / std::sqrt(x + 1e-300); };
  CHECK_THROWS_AS(adaptive_simpson(f, 0.0, 1.0, 1e-12, 4), QuadratureError);
}
