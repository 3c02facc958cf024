#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abandonq/primitives.hpp"
#include "abandonq/rng.hpp"

namespace abq {

// Monotone piecewise-linear table on [x.front(), x.back()], clamped beyond the
// last node.  Backs both tabulated patience CDFs and tabulated limit functions.
struct Table {
  std::vector<double> x;  // strictly increasing, x.front() == 0
  std::vector<double> y;  // nondecreasing, y.front() == 0

  void validate(bool cdf_range) const;  // cdf_range: additionally require y <= 1
  double eval(double q) const;          // linear interpolation, clamped right
  // inf{q : eval(q) >= level}; +inf when level exceeds the table's range
  double inverse(double level) const;
  double integral(double q) const;      // exact integral of the interpolant on [0, q]
  // largest jump between adjacent segment slopes; a rough smoothness measure
  double max_slope_jump() const;
};

// Two-column CSV (x, y); '#' comments and an optional text header are skipped.
Table load_table_csv(const std::string& path);

// The limit function H of a patience family: nonnegative, H(0) = 0, and in the
// scaling regime  sqrt(n) * F^n(x / sqrt(n)) -> H(x)  uniformly on compacts.
// Families whose CDF is too steep at zero carry an undefined H.
class LimitFn {
 public:
  static LimitFn zero();
  static LimitFn linear(double slope);
  // H(x) = sum_k coeffs[k] * x^k, coeffs[0] must be 0, all coeffs >= 0
  static LimitFn poly(std::vector<double> coeffs);
  static LimitFn table(Table t);
  // nondecreasing callable with fn(0) = 0; integral is memoized internally
  static LimitFn callable(std::function<double(double)> fn);
  static LimitFn undefined();

  bool defined() const { return kind_ != Kind::Undefined; }
  double operator()(double x) const;
  double integral(double x) const;          // int_0^x H(s) ds
  double inverse(double level) const;       // inf{x : H(x) >= level}, +inf if never
  bool unbounded() const;                   // whether H(x) -> inf as x -> inf
  double max_slope_jump() const;            // 0 unless tabulated
  std::string describe() const;

 private:
  enum class Kind { Zero, Poly, TableKind, Callable, Undefined };
  Kind kind_ = Kind::Undefined;
  std::vector<double> coeffs_;
  std::shared_ptr<const Table> table_;
  std::function<double(double)> fn_;
  std::shared_ptr<class CumulativeIntegral> cum_;  // integral memo for Callable
};

// Hazard-rate shape for hazard-scaled families.
class HazardFn {
 public:
  // h(u) = sum_k coeffs[k] * u^k, all coeffs >= 0 (constant hazard: one coeff)
  static HazardFn poly(std::vector<double> coeffs);
  static HazardFn callable(std::function<double(double)> fn);

  double operator()(double u) const;
  double integral(double y) const;  // int_0^y h(u) du, the induced limit fn H(y)
  LimitFn limit() const;            // same integral packaged as a LimitFn
  std::string describe() const;

 private:
  enum class Kind { Poly, Callable };
  Kind kind_ = Kind::Poly;
  std::vector<double> coeffs_;
  std::function<double(double)> fn_;
  std::shared_ptr<class CumulativeIntegral> cum_;
};

// Polynomial growth envelope sqrt(n) F^n(x/sqrt(n)) <= C (1 + x^m) declared by
// a family; checked on a grid by the scaling module.
struct GrowthBound {
  double C = 1.0;
  double m = 1.0;
};

// A patience-time triangular array {F^n}.  Every builder below shares one
// interface: evaluate F^n, draw from it by inverse transform, and expose the
// limit function H that the diffusion sees.
class PatienceFamily {
 public:
  enum class Variant { Unscaled, HazardScaled, CappedLimit, ExternalTable };

  // -- constructors ---------------------------------------------------------
  // patience never runs out: F^n == 0 (d = +inf almost surely)
  static PatienceFamily none();
  // F^n = F for every n (unscaled exponential: F(x) = 1 - exp(-beta x))
  static PatienceFamily unscaled_exponential(double beta);
  // F^n = F for every n with F(x) = min(1, x^alpha); steep at 0 for alpha < 1,
  // so the limit function is undefined.  Exists to exercise failure reporting.
  static PatienceFamily unscaled_power(double alpha);
  // F^n(x) = 1 - exp(-int_0^x h(sqrt(n) u) du)
  static PatienceFamily hazard_scaled(HazardFn h);
  // F^n(x) = min(H(sqrt(n) x), sqrt(n)) / sqrt(n)
  static PatienceFamily capped_limit(LimitFn H);
  // F^n = tabulated F for every n; H tabulated/supplied or derived from the
  // slope of the first segment
  static PatienceFamily external_table(Table F, std::optional<LimitFn> H = std::nullopt);

  Variant variant() const { return variant_; }

  // F^n(x); 0 for x <= 0, nondecreasing, with values in [0, 1]
  double cdf(std::int64_t n, double x) const;
  // sqrt(n) * F^n(x / sqrt(n)) evaluated in one step (expm1-based where it
  // matters, so scaling-limit errors stay resolvable at n ~ 1e6)
  double scaled_cdf(std::int64_t n, double x) const;
  // inf{x : F^n(x) >= u}; +inf when u exceeds the reachable mass
  double quantile(std::int64_t n, double u) const;
  // inverse-transform draw; consumes exactly one uniform from rng
  double sample(std::int64_t n, Rng& rng) const;

  const LimitFn& limit() const { return limit_; }
  const std::optional<GrowthBound>& growth() const { return growth_; }
  void set_growth(GrowthBound g) { growth_ = g; }

  std::string describe() const;

 private:
  Variant variant_ = Variant::Unscaled;
  // Unscaled / ExternalTable state
  enum class CdfKind { Zero, Exponential, Power, Tabulated };
  CdfKind cdf_kind_ = CdfKind::Zero;
  double beta_ = 1.0;   // Exponential rate
  double alpha_ = 0.5;  // Power exponent
  std::shared_ptr<const Table> table_;
  // HazardScaled / CappedLimit state
  std::optional<HazardFn> hazard_;
  LimitFn limit_ = LimitFn::zero();
  std::optional<GrowthBound> growth_;

  double unscaled_cdf(double x) const;
  double unscaled_quantile(double u) const;
};

// Sup-error report of the scaling limit:  for each n in n_list, the max over a
// uniform grid on [0, K] of |sqrt(n) F^n(x/sqrt(n)) - H(x)|.
struct ScalingLimitReport {
  std::vector<std::int64_t> n_list;
  std::vector<double> sup_error;      // aligned with n_list
  bool errors_nonincreasing = true;   // up to 1e-12 grid-noise slack
  double grid_hi = 0.0;
  std::size_t grid_points = 0;
};

ScalingLimitReport check_scaling_limit(const PatienceFamily& fam, double K,
                                       const std::vector<std::int64_t>& n_list,
                                       std::size_t grid_points = 2001);

// Drift-dominance proxy on a finite window: H(x_max) must exceed theta/lambda
// for the limiting diffusion to admit a stationary law.
struct StabilityReport {
  bool satisfied = false;
  double margin = 0.0;  // H(x_max) - theta/lambda
  double x_max = 0.0;
};

StabilityReport check_stability(const PatienceFamily& fam, double theta,
                                double lambda, double x_max);

}  // namespace abq
