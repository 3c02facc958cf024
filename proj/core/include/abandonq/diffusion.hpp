#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abandonq/patience.hpp"
#include "abandonq/primitives.hpp"
#include "abandonq/quadrature.hpp"
#include "abandonq/rng.hpp"

namespace abq {

// Raised when the stationary law cannot be certified (drift never turns
// negative, tail refuses to decay within the search window, ...).
class StabilityError : public std::runtime_error {
 public:
  explicit StabilityError(const std::string& what) : std::runtime_error(what) {}
};

// One-dimensional reflected limit diffusion on [0, inf):
//   dV = (drift_const - H(V)) dt + sigma dW + dL,
// L the boundary local time.  Its stationary density, when it exists, is
//   f(x) = M exp(l(x)),   l(x) = (2/sigma2) (drift_const x - int_0^x H).
struct DiffusionModel {
  double sigma2 = 1.0;       // diffusion coefficient squared
  double drift_const = 0.0;  // theta / lambda
  LimitFn H = LimitFn::zero();

  // sigma2 = (var(u) + var(v)) / lambda from the primitive pair
  static DiffusionModel from_primitives(const PrimitiveSpec& u, const PrimitiveSpec& v,
                                        double lambda, double theta, LimitFn H);

  double drift(double x) const { return drift_const - H(x); }
  double log_density_unnorm(double x) const {
    return (2.0 / sigma2) * (drift_const * x - H.integral(x));
  }
};

// Normalized stationary law, held as a truncated log-density integral: the
// adaptive panels of exp(l - ell_max) on [0, x_cut] plus their prefix sums,
// which makes density/CDF/quantile/moment evaluation cheap afterwards.
class DiffusionStationary {
 public:
  double norm_const() const { return norm_const_; }   // M
  double x_cut() const { return x_cut_; }
  double tail_bound_rel() const { return tail_rel_; } // certified truncated mass
  double quad_error_rel() const { return quad_rel_; }

  double density(double x) const;
  double cdf(double x) const;        // truncated at x_cut (tail below tolerance)
  double quantile(double q) const;   // q in (0, 1)
  double moment(double m) const;     // E[V^m], m > 0
  double expect_limit() const;       // E[H(V)], the limiting abandonment scale
  // E[g(V)] for nonnegative g of at most polynomial growth
  double expect(const std::function<double(double)>& g) const;

  // diagnostic: drift at x_cut (should be well negative)
  double drift_at_cut() const { return model_.drift(x_cut_); }
  const DiffusionModel& model() const { return model_; }

 private:
  friend DiffusionStationary build_stationary(const DiffusionModel&, double);
  DiffusionModel model_;
  double tol_ = 1e-10;
  double x_cut_ = 0.0;
  double ell_max_ = 0.0;
  double shifted_mass_ = 0.0;  // int_0^{x_cut} exp(l - ell_max)
  double norm_const_ = 0.0;
  double tail_rel_ = 0.0;
  double quad_rel_ = 0.0;
  std::vector<QuadPanel> panels_;       // exp(l - ell_max), spatially sorted
  std::vector<double> panel_prefix_;    // cumulative panel mass

  double shifted(double x) const;       // exp(l(x) - ell_max)
  double cdf_shifted_mass(double x) const;
};

// Locate the quadrature window by doubling from x0 = 10 (1 + max(drift_const,
// 1)) until the certified tail envelope drops below tol relative to the bulk;
// throws StabilityError when the drift never certifies decay (hard stop at
// x = 1e6) and ConfigError when sigma2 <= 0 or H is undefined.
DiffusionStationary build_stationary(const DiffusionModel& model, double tol = 1e-10);

// Euler-Maruyama with projection reflection:
//   V_{k+1} = max(V_k + drift(V_k) dt + sigma sqrt(dt) Z_k, 0),
// the clipped amount accumulating into the reflection term L.
struct SdeConfig {
  double dt = 1e-3;
  double t_end = 1e5;
  double burn_in = 1e3;
  double v0 = 0.0;
  std::uint64_t seed = 1;
  std::vector<double> moment_orders = {1.0};
  int num_batches = 32;
};

struct SdeMoment {
  double value = 0.0;      // time average over [burn_in, t_end]
  double std_error = 0.0;  // batch-means standard error (1 sigma)
};

struct SdeResult {
  std::vector<SdeMoment> moments;  // aligned with cfg.moment_orders
  double total_reflection = 0.0;   // L(t_end)
  // reflection-weighted mean of the pre-step state, sum V_k dL_k / sum dL_k;
  // should be O(sigma sqrt(dt)) since reflection only acts near the boundary
  double complementarity = 0.0;
  std::int64_t steps = 0;
};

SdeResult simulate_sde(const DiffusionModel& model, const SdeConfig& cfg);

}  // namespace abq
