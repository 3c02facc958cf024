#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "abandonq/rng.hpp"

namespace abq {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Base distribution of an interarrival / service primitive.  Every kind is
// normalized to mean exactly 1; the heavy-traffic schedule supplies the rate
// scaling, so the base draw never carries units.
enum class PrimitiveKind {
  Exponential,       // rate 1
  Gamma,             // shape k, scale 1/k
  Lognormal,         // sigma s, mu = -s^2/2
  Deterministic,     // point mass at 1
  Hyperexponential,  // mixture of exponentials, rates rescaled to mean 1
  Uniform,           // [1 - w/2, 1 + w/2], w <= 2
};

struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Exponential;
  double shape = 1.0;                // Gamma
  double sigma = 1.0;                // Lognormal
  double width = 1.0;                // Uniform
  std::vector<double> weights;       // Hyperexponential
  std::vector<double> rates;         // Hyperexponential, already rescaled to mean 1
  double point_mass = 1.0;           // Deterministic; != 1 only via degenerate()

  static PrimitiveSpec exponential();
  static PrimitiveSpec gamma(double shape);
  static PrimitiveSpec lognormal(double sigma);
  static PrimitiveSpec deterministic();
  static PrimitiveSpec hyperexponential(std::vector<double> weights,
                                        std::vector<double> rates);
  static PrimitiveSpec uniform(double width);

  // Point mass at an arbitrary value, mean-1 invariant deliberately broken.
  // Exists for degenerate sanity paths in tests (e.g. zero service times);
  // the experiment validator rejects it.
  static PrimitiveSpec degenerate(double value);

  double sample(Rng& rng) const;

  double mean() const;      // 1 except for degenerate()
  double variance() const;
  // E[X^p] for real p > 0; finite for every built-in kind, so the moment
  // validator below is a guard against future heavy-tailed kinds.
  double raw_moment(double p) const;
  bool has_finite_moment(double p) const;

  // Whether the support is unbounded above (needed by the interarrival
  // unboundedness check; bounded kinds only draw a warning).
  bool unbounded_support() const;

  std::string describe() const;
};

// Heavy-traffic schedule for system index n:
//   arrival rate   lambda_n = n * lambda,
//   service rate   mu_n     = n * lambda - sqrt(n) * theta,
// so the centered slack  sqrt(n) * (lambda - mu_n / n)  equals theta exactly
// at every n, not just in the limit.
struct HeavyTrafficParams {
  double lambda = 1.0;   // base arrival rate, > 0
  double theta = 0.0;    // slack parameter, any sign
  std::int64_t n = 1;    // scale index, >= 1

  HeavyTrafficParams() = default;
  HeavyTrafficParams(double lambda_, double theta_, std::int64_t n_);

  double lambda_n() const { return static_cast<double>(n) * lambda; }
  double mu_n() const;
  double sqrt_n() const;
  // physical draw scales: u_j = u_base / lambda_n, v_j = v_base / mu_n
  double interarrival_scale() const { return 1.0 / lambda_n(); }
  double service_scale() const { return 1.0 / mu_n(); }
};

}  // namespace abq
