#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "abandonq/patience.hpp"

namespace abq {

// Dominating patience family: caps the scaled CDF at  cap_level = theta/lambda
// + sigma_bar, i.e.  sqrt(n) F^{n*}(x/sqrt(n)) = min(sqrt(n) F^n(x/sqrt(n)),
// cap_level).  The dominating system abandons less, so its offered waiting
// time bounds the base system's from above (up to the largest service brought
// in), which is what the coupled simulator verifies pathwise.
class DominatingFamily {
 public:
  // sigma_bar defaults to half the stability margin H(x_max) - theta/lambda
  // and must come out positive; cap_level itself may be <= 0 (theta < 0), in
  // which case the dominating system never abandons at all.
  static DominatingFamily make(PatienceFamily base, double theta, double lambda,
                               std::optional<double> sigma_bar = std::nullopt,
                               double x_max = 50.0);

  const PatienceFamily& base() const { return base_; }
  double sigma_bar() const { return sigma_bar_; }
  double cap_level() const { return cap_level_; }

  // F^{n*}(x) = clamp(min(F^n(x), cap_level / sqrt(n)), >= 0): a sub-probability
  // CDF; total mass cap_mass(n) < 1 exactly when the cap binds.
  double cdf(std::int64_t n, double x) const;
  double cap_mass(std::int64_t n) const;

  // Transport a base patience draw d ~ F^n to the dominating system:
  //   d* = inf{x : F^{n*}(x) = F^n(d)},
  // realized as d* = d while F^n(d) stays within the cap and +inf beyond it.
  // Guarantees d* >= d and leaves d* distributed according to F^{n*}.
  double couple(std::int64_t n, double d) const;

 private:
  PatienceFamily base_;
  double sigma_bar_ = 0.0;
  double cap_level_ = 0.0;
};

// Grid check of a declared polynomial growth envelope
//   sqrt(n) F^n(x/sqrt(n)) <= C (1 + x^m)  on [0, x_max] for each listed n.
struct GrowthBoundReport {
  bool ok = true;
  GrowthBound bound;
  double worst_margin = 0.0;   // min over the grid of C(1+x^m) - scaled CDF
  double witness_x = 0.0;      // where the worst margin occurred
  std::int64_t witness_n = 0;
  double x_max = 0.0;
};

// Uses the explicit bound when given, otherwise the family's declared one;
// throws ConfigError when neither exists.
GrowthBoundReport check_growth_bound(const PatienceFamily& fam,
                                     const std::vector<std::int64_t>& n_list,
                                     double x_max, std::size_t grid_points = 2001,
                                     std::optional<GrowthBound> bound = std::nullopt);

}  // namespace abq
