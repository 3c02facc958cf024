#include "abandonq/primitives.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace abq {

PrimitiveSpec PrimitiveSpec::exponential() {
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Exponential;
  return s;
}

PrimitiveSpec PrimitiveSpec::gamma(double shape) {
  if (!(shape > 0.0)) throw ConfigError("gamma primitive: shape must be > 0");
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Gamma;
  s.shape = shape;
  return s;
}

PrimitiveSpec PrimitiveSpec::lognormal(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("lognormal primitive: sigma must be > 0");
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Lognormal;
  s.sigma = sigma;
  return s;
}

PrimitiveSpec PrimitiveSpec::deterministic() {
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Deterministic;
  s.point_mass = 1.0;
  return s;
}

PrimitiveSpec PrimitiveSpec::degenerate(double value) {
  if (!(value >= 0.0)) throw ConfigError("degenerate primitive: value must be >= 0");
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Deterministic;
  s.point_mass = value;
  return s;
}

PrimitiveSpec PrimitiveSpec::hyperexponential(std::vector<double> weights,
                                              std::vector<double> rates) {
  if (weights.size() != rates.size() || weights.empty()) {
    throw ConfigError("hyperexponential primitive: weights/rates must be non-empty and equal length");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("hyperexponential primitive: weights must be > 0");
    wsum += w;
  }
  for (auto& w : weights) w /= wsum;
  double mean0 = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] > 0.0)) throw ConfigError("hyperexponential primitive: rates must be > 0");
    mean0 += weights[i] / rates[i];
  }
  // X -> X / mean0 rescales each component rate by mean0 and makes the mean 1
  for (auto& r : rates) r *= mean0;
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Hyperexponential;
  s.weights = std::move(weights);
  s.rates = std::move(rates);
  return s;
}

PrimitiveSpec PrimitiveSpec::uniform(double width) {
  if (!(width > 0.0) || width > 2.0) {
    throw ConfigError("uniform primitive: width must lie in (0, 2] to keep support nonnegative");
  }
  PrimitiveSpec s;
  s.kind = PrimitiveKind::Uniform;
  s.width = width;
  return s;
}

double PrimitiveSpec::sample(Rng& rng) const {
  switch (kind) {
    case PrimitiveKind::Exponential:
      return -std::log1p(-rng.uniform());
    case PrimitiveKind::Gamma: {
      std::gamma_distribution<double> d(shape, 1.0 / shape);
      return d(rng.engine());
    }
    case PrimitiveKind::Lognormal:
      return std::exp(-0.5 * sigma * sigma + sigma * rng.normal());
    case PrimitiveKind::Deterministic:
      return point_mass;
    case PrimitiveKind::Hyperexponential: {
      double u = rng.uniform();
      std::size_t i = 0;
      for (; i + 1 < weights.size(); ++i) {
        if (u < weights[i]) break;
        u -= weights[i];
      }
      return -std::log1p(-rng.uniform()) / rates[i];
    }
    case PrimitiveKind::Uniform:
      return 1.0 - 0.5 * width + width * rng.uniform();
  }
  throw std::logic_error("unreachable primitive kind");
}

double PrimitiveSpec::mean() const {
  return kind == PrimitiveKind::Deterministic ? point_mass : 1.0;
}

double PrimitiveSpec::variance() const {
  switch (kind) {
    case PrimitiveKind::Exponential: return 1.0;
    case PrimitiveKind::Gamma: return 1.0 / shape;
    case PrimitiveKind::Lognormal: return std::expm1(sigma * sigma);
    case PrimitiveKind::Deterministic: return 0.0;
    case PrimitiveKind::Hyperexponential: {
      double m2 = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        m2 += weights[i] * 2.0 / (rates[i] * rates[i]);
      }
      return m2 - 1.0;
    }
    case PrimitiveKind::Uniform: return width * width / 12.0;
  }
  throw std::logic_error("unreachable primitive kind");
}

double PrimitiveSpec::raw_moment(double p) const {
  if (!(p > 0.0)) throw ConfigError("raw_moment: order must be > 0");
  switch (kind) {
    case PrimitiveKind::Exponential:
      return std::tgamma(p + 1.0);
    case PrimitiveKind::Gamma:
      return std::tgamma(shape + p) / (std::tgamma(shape) * std::pow(shape, p));
    case PrimitiveKind::Lognormal:
      return std::exp(0.5 * p * (p - 1.0) * sigma * sigma);
    case PrimitiveKind::Deterministic:
      return std::pow(point_mass, p);
    case PrimitiveKind::Hyperexponential: {
      double m = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        m += weights[i] * std::tgamma(p + 1.0) / std::pow(rates[i], p);
      }
      return m;
    }
    case PrimitiveKind::Uniform: {
      const double a = 1.0 - 0.5 * width;
      const double b = 1.0 + 0.5 * width;
      return (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / ((p + 1.0) * (b - a));
    }
  }
  throw std::logic_error("unreachable primitive kind");
}

bool PrimitiveSpec::has_finite_moment(double p) const {
  // every built-in kind has all positive moments finite; the check guards the
  // interface against future heavy-tailed additions
  return std::isfinite(raw_moment(p));
}

bool PrimitiveSpec::unbounded_support() const {
  switch (kind) {
    case PrimitiveKind::Exponential:
    case PrimitiveKind::Gamma:
    case PrimitiveKind::Lognormal:
    case PrimitiveKind::Hyperexponential:
      return true;
    case PrimitiveKind::Deterministic:
    case PrimitiveKind::Uniform:
      return false;
  }
  throw std::logic_error("unreachable primitive kind");
}

std::string PrimitiveSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case PrimitiveKind::Exponential: os << "exponential(mean 1)"; break;
    case PrimitiveKind::Gamma: os << "gamma(shape " << shape << ", mean 1)"; break;
    case PrimitiveKind::Lognormal: os << "lognormal(sigma " << sigma << ", mean 1)"; break;
    case PrimitiveKind::Deterministic: os << "deterministic(" << point_mass << ")"; break;
    case PrimitiveKind::Hyperexponential: os << "hyperexponential(" << weights.size() << " phases, mean 1)"; break;
    case PrimitiveKind::Uniform: os << "uniform(width " << width << ", mean 1)"; break;
  }
  return os.str();
}

HeavyTrafficParams::HeavyTrafficParams(double lambda_, double theta_, std::int64_t n_)
    : lambda(lambda_), theta(theta_), n(n_) {
  if (!(lambda > 0.0)) throw ConfigError("heavy-traffic params: lambda must be > 0");
  if (n < 1) throw ConfigError("heavy-traffic params: n must be >= 1");
  if (!(mu_n() > 0.0)) {
    std::ostringstream os;
    os << "heavy-traffic params: service rate n*lambda - sqrt(n)*theta = " << mu_n()
       << " must be > 0 (n = " << n << ", lambda = " << lambda << ", theta = " << theta << ")";
    throw ConfigError(os.str());
  }
}

double HeavyTrafficParams::mu_n() const {
  return static_cast<double>(n) * lambda - std::sqrt(static_cast<double>(n)) * theta;
}

double HeavyTrafficParams::sqrt_n() const {
  return std::sqrt(static_cast<double>(n));
}

}  // namespace abq
