#include "abandonq/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace abq {

DiffusionModel DiffusionModel::from_primitives(const PrimitiveSpec& u,
                                               const PrimitiveSpec& v, double lambda,
                                               double theta, LimitFn H) {
  if (!(lambda > 0.0)) throw ConfigError("diffusion model: lambda must be > 0");
  DiffusionModel m;
  m.sigma2 = (u.variance() + v.variance()) / lambda;
  m.drift_const = theta / lambda;
  m.H = std::move(H);
  return m;
}

namespace {

// scan maximum of l on [0, hi]; exact location is irrelevant (any shift near
// the max prevents overflow, and the shift cancels in every ratio)
double scan_ell_max(const DiffusionModel& m, double hi, int points = 4097) {
  double best = m.log_density_unnorm(0.0);  // = 0
  for (int i = 1; i < points; ++i) {
    const double x = hi * static_cast<double>(i) / static_cast<double>(points - 1);
    best = std::max(best, m.log_density_unnorm(x));
  }
  return best;
}

}  // namespace

DiffusionStationary build_stationary(const DiffusionModel& model, double tol) {
  if (!(model.sigma2 > 0.0)) {
    throw ConfigError("stationary law: sigma^2 must be > 0 (deterministic primitives excluded)");
  }
  if (!model.H.defined()) {
    throw ConfigError("stationary law: limit function undefined for this family");
  }
  if (!(tol > 0.0) || tol >= 1e-2) throw ConfigError("stationary law: tol must lie in (0, 1e-2)");

  constexpr double kHardStop = 1e6;
  const double x0 = 10.0 * (1.0 + std::max(model.drift_const, 1.0));

  DiffusionStationary st;
  st.model_ = model;
  st.tol_ = tol;

  double x = x0;
  for (;;) {
    if (x > kHardStop) {
      std::ostringstream os;
      os << "stationary law: density tail not certified to decay by x = " << kHardStop
         << " (drift " << model.drift(x0) << " at window start; "
         << "is the limit function eventually above theta/lambda?)";
      throw StabilityError(os.str());
    }
    // Decay certificate: -l' must be positive at the cut and stay positive on
    // probe points beyond it (true for any nondecreasing limit function).
    const double two_over_s2 = 2.0 / model.sigma2;
    double kappa = std::numeric_limits<double>::infinity();
    bool decaying = true;
    for (double q : {1.0, 1.25, 1.5, 2.0, 4.0}) {
      const double neg_lp = two_over_s2 * (model.H(q * x) - model.drift_const);
      if (!(neg_lp > 0.0)) { decaying = false; break; }
      kappa = std::min(kappa, neg_lp);
    }
    if (!decaying) {
      x *= 2.0;
      continue;
    }

    const double ell_max = scan_ell_max(model, x);
    auto shifted = [&](double t) { return std::exp(model.log_density_unnorm(t) - ell_max); };
    auto quad = adaptive_gauss_kronrod(shifted, 0.0, x, tol, 0.0, 200000);
    const double tail = shifted(x) / kappa;  // envelope integral bound
    if (tail <= tol * quad.value) {
      st.x_cut_ = x;
      st.ell_max_ = ell_max;
      st.shifted_mass_ = quad.value;
      st.tail_rel_ = tail / quad.value;
      st.quad_rel_ = quad.error_estimate / quad.value;
      st.panels_ = std::move(quad.panels);
      st.panel_prefix_.resize(st.panels_.size());
      double run = 0.0;
      for (std::size_t i = 0; i < st.panels_.size(); ++i) {
        run += st.panels_[i].integral;
        st.panel_prefix_[i] = run;
      }
      st.norm_const_ = std::exp(-ell_max) / st.shifted_mass_;
      return st;
    }
    x *= 2.0;
  }
}

double DiffusionStationary::shifted(double x) const {
  return std::exp(model_.log_density_unnorm(x) - ell_max_);
}

double DiffusionStationary::density(double x) const {
  if (x < 0.0) return 0.0;
  // M e^{l(x)} with the shift folded in: e^{l - ell_max} / shifted_mass
  return shifted(x) / shifted_mass_;
}

double DiffusionStationary::cdf_shifted_mass(double x) const {
  // mass of exp(l - ell_max) on [0, x] using the stored panels
  if (x <= 0.0) return 0.0;
  if (x >= x_cut_) return shifted_mass_;
  auto it = std::upper_bound(panels_.begin(), panels_.end(), x,
                             [](double v, const QuadPanel& p) { return v < p.b; });
  const std::size_t k = static_cast<std::size_t>(it - panels_.begin());
  double mass = k > 0 ? panel_prefix_[k - 1] : 0.0;
  if (k < panels_.size() && x > panels_[k].a) {
    auto f = [this](double t) { return shifted(t); };
    mass += adaptive_gauss_kronrod(f, panels_[k].a, x, 1e-12, 1e-300, 2000).value;
  }
  return mass;
}

double DiffusionStationary::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= x_cut_) return 1.0;
  return std::clamp(cdf_shifted_mass(x) / shifted_mass_, 0.0, 1.0);
}

double DiffusionStationary::quantile(double q) const {
  if (!(q > 0.0) || !(q < 1.0)) {
    throw ConfigError("stationary quantile: q must lie strictly inside (0, 1)");
  }
  double lo = 0.0, hi = x_cut_;
  // bisect on the CDF; 60 iterations drive the bracket below any tolerance of
  // interest while each step costs one partial-panel integral
  for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double DiffusionStationary::expect(const std::function<double(double)>& g) const {
  // integrate g * exp(l - ell_max) over the build window, then extend by
  // doubling so polynomially growing g cannot lose tail mass at tolerance
  auto f = [&](double t) { return g(t) * shifted(t); };
  double total = adaptive_gauss_kronrod(f, 0.0, x_cut_, tol_, 0.0, 200000).value;
  double lo = x_cut_;
  for (int ext = 0; ext < 60; ++ext) {
    const double hi = 2.0 * lo;
    double add = 0.0;
    try {
      add = adaptive_gauss_kronrod(f, lo, hi, tol_, 1e-300, 50000).value;
    } catch (const QuadratureError&) {
      break;  // integrand underflowed to noise; nothing left out there
    }
    total += add;
    if (std::abs(add) <= 0.5 * tol_ * std::abs(total)) break;
    lo = hi;
  }
  return total / shifted_mass_;
}

double DiffusionStationary::moment(double m) const {
  if (!(m > 0.0)) throw ConfigError("stationary moment: order must be > 0");
  return expect([m](double x) { return std::pow(x, m); });
}

double DiffusionStationary::expect_limit() const {
  const LimitFn& H = model_.H;
  return expect([&H](double x) { return H(x); });
}

SdeResult simulate_sde(const DiffusionModel& model, const SdeConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("sde: dt must be > 0");
  if (!(cfg.t_end > cfg.burn_in) || cfg.burn_in < 0.0) {
    throw ConfigError("sde: need 0 <= burn_in < t_end");
  }
  if (cfg.num_batches < 2) throw ConfigError("sde: need at least 2 batches");
  for (double m : cfg.moment_orders) {
    if (!(m > 0.0)) throw ConfigError("sde: moment orders must be > 0");
  }
  if (!(cfg.v0 >= 0.0)) throw ConfigError("sde: initial state must be >= 0");
  if (!model.H.defined()) throw ConfigError("sde: limit function undefined");
  if (model.sigma2 < 0.0) throw ConfigError("sde: sigma^2 must be >= 0");

  const double sigma_dt = std::sqrt(model.sigma2) * std::sqrt(cfg.dt);
  const auto total_steps = static_cast<std::int64_t>(std::ceil(cfg.t_end / cfg.dt));
  const auto burn_steps = static_cast<std::int64_t>(std::ceil(cfg.burn_in / cfg.dt));
  const std::int64_t window = total_steps - burn_steps;
  if (window < cfg.num_batches) throw ConfigError("sde: window too short for batching");
  const std::int64_t batch_len = window / cfg.num_batches;

  Rng rng(derive_seed(cfg.seed, 7));
  const std::size_t M = cfg.moment_orders.size();

  std::vector<std::vector<Kahan>> batch_sum(cfg.num_batches, std::vector<Kahan>(M));
  std::vector<std::int64_t> batch_count(cfg.num_batches, 0);
  Kahan refl_total, refl_weighted;

  double v = cfg.v0;
  for (std::int64_t k = 0; k < total_steps; ++k) {
    const double pre = v;
    const double prop = v + model.drift(v) * cfg.dt + sigma_dt * rng.normal();
    if (prop < 0.0) {
      refl_total.add(-prop);
      refl_weighted.add(pre * (-prop));
      v = 0.0;
    } else {
      v = prop;
    }
    if (k >= burn_steps) {
      const std::int64_t w = k - burn_steps;
      std::int64_t b = w / batch_len;
      if (b >= cfg.num_batches) b = cfg.num_batches - 1;  // remainder -> last batch
      ++batch_count[b];
      for (std::size_t i = 0; i < M; ++i) {
        const double m = cfg.moment_orders[i];
        batch_sum[b][i].add(m == 1.0 ? v : (m == 2.0 ? v * v : std::pow(v, m)));
      }
    }
  }

  SdeResult out;
  out.steps = total_steps;
  out.total_reflection = refl_total.value();
  out.complementarity =
      refl_total.value() > 0.0 ? refl_weighted.value() / refl_total.value() : 0.0;
  out.moments.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<double> means;
    means.reserve(cfg.num_batches);
    double grand = 0.0;
    std::int64_t count = 0;
    for (int b = 0; b < cfg.num_batches; ++b) {
      if (batch_count[b] > 0) {
        means.push_back(batch_sum[b][i].value() / static_cast<double>(batch_count[b]));
        grand += batch_sum[b][i].value();
        count += batch_count[b];
      }
    }
    out.moments[i].value = grand / static_cast<double>(count);
    if (means.size() >= 2) {
      double mean = 0.0;
      for (double x : means) mean += x;
      mean /= static_cast<double>(means.size());
      double ss = 0.0;
      for (double x : means) ss += (x - mean) * (x - mean);
      out.moments[i].std_error =
          std::sqrt(ss / static_cast<double>(means.size() - 1)) /
          std::sqrt(static_cast<double>(means.size()));
    }
  }
  return out;
}

}  // namespace abq
