#include "abandonq/scaling.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace abq {

DominatingFamily DominatingFamily::make(PatienceFamily base, double theta,
                                        double lambda, std::optional<double> sigma_bar,
                                        double x_max) {
  if (!(lambda > 0.0)) throw ConfigError("dominating family: lambda must be > 0");
  DominatingFamily dom;
  if (sigma_bar) {
    dom.sigma_bar_ = *sigma_bar;
  } else {
    const auto stab = check_stability(base, theta, lambda, x_max);
    dom.sigma_bar_ = 0.5 * stab.margin;
  }
  if (!(dom.sigma_bar_ > 0.0)) {
    std::ostringstream os;
    os << "dominating family: sigma_bar = " << dom.sigma_bar_
       << " must be > 0 (stability margin nonpositive?)";
    throw ConfigError(os.str());
  }
  dom.cap_level_ = theta / lambda + dom.sigma_bar_;
  dom.base_ = std::move(base);
  return dom;
}

double DominatingFamily::cap_mass(std::int64_t n) const {
  const double q = cap_level_ / std::sqrt(static_cast<double>(n));
  return std::min(1.0, std::max(0.0, q));
}

double DominatingFamily::cdf(std::int64_t n, double x) const {
  return std::min(base_.cdf(n, x), cap_mass(n));
}

double DominatingFamily::couple(std::int64_t n, double d) const {
  if (std::isinf(d)) return d;  // base never abandons; neither may the bound
  const double q = base_.cdf(n, d);
  // Below the cap F^{n*} coincides with F^n, so d itself realizes the level-set
  // infimum (a.s.) while keeping d* >= d deterministic even across flat spots.
  // At-or-above the cap the level set is empty: infinite patience.
  if (q <= cap_level_ / std::sqrt(static_cast<double>(n))) return d;
  return std::numeric_limits<double>::infinity();
}

GrowthBoundReport check_growth_bound(const PatienceFamily& fam,
                                     const std::vector<std::int64_t>& n_list,
                                     double x_max, std::size_t grid_points,
                                     std::optional<GrowthBound> bound) {
  if (!(x_max > 0.0)) throw ConfigError("growth check: x_max must be > 0");
  if (grid_points < 2) throw ConfigError("growth check: need at least 2 grid points");
  if (n_list.empty()) throw ConfigError("growth check: n_list must not be empty");
  GrowthBound b;
  if (bound) {
    b = *bound;
  } else if (fam.growth()) {
    b = *fam.growth();
  } else {
    throw ConfigError("growth check: family declares no growth bound");
  }
  if (!(b.C > 0.0) || !(b.m > 0.0)) {
    throw ConfigError("growth check: bound requires C > 0 and m > 0");
  }

  GrowthBoundReport rep;
  rep.bound = b;
  rep.x_max = x_max;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::int64_t n : n_list) {
    for (std::size_t i = 0; i < grid_points; ++i) {
      const double x = x_max * static_cast<double>(i) / static_cast<double>(grid_points - 1);
      const double envelope = b.C * (1.0 + std::pow(x, b.m));
      const double margin = envelope - fam.scaled_cdf(n, x);
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.witness_x = x;
        rep.witness_n = n;
      }
    }
  }
  rep.ok = rep.worst_margin >= 0.0;
  return rep;
}

}  // namespace abq
