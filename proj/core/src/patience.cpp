#include "abandonq/patience.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "abandonq/quadrature.hpp"

namespace abq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
  return v;
}

double poly_integral(const std::vector<double>& c, double x) {
  // int_0^x sum c_k s^k ds = sum c_k x^{k+1} / (k+1)
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) {
    v = v * x + c[k] / static_cast<double>(k + 1);
  }
  return v * x;
}

// inf{x >= 0 : g(x) >= level} for nondecreasing g with g(0) <= level.
// Bracket by doubling, then bisect to 1e-12 in x; returns the lower bracket
// endpoint so that g(result) never overshoots the level for continuous g.
double monotone_inverse(const std::function<double(double)>& g, double level) {
  if (g(0.0) >= level) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (g(hi) < level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) return kInf;
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) >= level) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo;
}

}  // namespace

// --------------------------------------------------------------------------
// Table

void Table::validate(bool cdf_range) const {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("table: need at least two (x, y) rows of equal length");
  }
  if (x.front() != 0.0 || y.front() != 0.0) {
    throw ConfigError("table: first row must be (0, 0)");
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw ConfigError("table: x must be strictly increasing");
    if (y[i] < y[i - 1]) throw ConfigError("table: y must be nondecreasing");
  }
  if (cdf_range && y.back() > 1.0 + 1e-12) {
    throw ConfigError("table: CDF values must not exceed 1");
  }
}

double Table::eval(double q) const {
  if (q <= x.front()) return y.front();
  if (q >= x.back()) return y.back();  // clamped beyond the table
  const auto it = std::upper_bound(x.begin(), x.end(), q);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  const double t = (q - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + t * (y[j] - y[j - 1]);
}

double Table::inverse(double level) const {
  if (level <= y.front()) return x.front();
  if (level > y.back()) return kInf;
  const auto it = std::lower_bound(y.begin(), y.end(), level);
  const std::size_t j = static_cast<std::size_t>(it - y.begin());
  // y[j] >= level > y[j-1], so the segment has positive rise
  const double t = (level - y[j - 1]) / (y[j] - y[j - 1]);
  return x[j - 1] + t * (x[j] - x[j - 1]);
}

double Table::integral(double q) const {
  if (q <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (q <= x[i]) {
      const double yq = eval(q);
      acc += 0.5 * (y[i - 1] + yq) * (q - x[i - 1]);
      return acc;
    }
    acc += 0.5 * (y[i - 1] + y[i]) * (x[i] - x[i - 1]);
  }
  return acc + y.back() * (q - x.back());  // constant continuation
}

double Table::max_slope_jump() const {
  double worst = 0.0;
  double prev = (y[1] - y[0]) / (x[1] - x[0]);
  for (std::size_t i = 2; i < x.size(); ++i) {
    const double s = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
    worst = std::max(worst, std::abs(s - prev));
    prev = s;
  }
  return worst;
}

Table load_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table CSV: " + path);
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    // strip whitespace and skip comments / blanks
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    std::string body = line.substr(b);
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream row(body);
    double xv, yv;
    if (!(row >> xv >> yv)) {
      if (!saw_data) continue;  // tolerate one leading text header
      std::ostringstream os;
      os << "table CSV " << path << ": cannot parse line " << lineno;
      throw ConfigError(os.str());
    }
    saw_data = true;
    t.x.push_back(xv);
    t.y.push_back(yv);
  }
  t.validate(/*cdf_range=*/false);
  return t;
}

// --------------------------------------------------------------------------
// CumulativeIntegral: memoized int_0^x g, extended cell by cell on demand.

class CumulativeIntegral {
 public:
  CumulativeIntegral(std::function<double(double)> g, double cell, double tol)
      : g_(std::move(g)), cell_(cell), tol_(tol) {
    cum_.push_back(0.0);
  }

  double eval(double x) const {
    if (x <= 0.0) return 0.0;
    const auto k = static_cast<std::size_t>(x / cell_);
    if (k > 20'000'000) {
      throw QuadratureError("cumulative integral: argument too large to tabulate");
    }
    std::lock_guard<std::mutex> lock(mu_);
    while (cum_.size() <= k) {
      const auto j = cum_.size();
      const double a = cell_ * static_cast<double>(j - 1);
      cum_.push_back(cum_.back() + adaptive_simpson(g_, a, a + cell_, tol_));
    }
    const double base = cell_ * static_cast<double>(k);
    return cum_[k] + adaptive_simpson(g_, base, x, tol_);
  }

 private:
  std::function<double(double)> g_;
  double cell_;
  double tol_;
  mutable std::mutex mu_;
  mutable std::vector<double> cum_;
};

// --------------------------------------------------------------------------
// LimitFn

LimitFn LimitFn::zero() {
  LimitFn f;
  f.kind_ = Kind::Zero;
  return f;
}

LimitFn LimitFn::linear(double slope) { return poly({0.0, slope}); }

LimitFn LimitFn::poly(std::vector<double> coeffs) {
  if (coeffs.empty()) return zero();
  if (coeffs[0] != 0.0) {
    throw ConfigError("limit function polynomial: constant term must be 0 (H(0) = 0)");
  }
  bool any = false;
  for (double c : coeffs) {
    if (c < 0.0) throw ConfigError("limit function polynomial: coefficients must be >= 0");
    if (c > 0.0) any = true;
  }
  if (!any) return zero();
  LimitFn f;
  f.kind_ = Kind::Poly;
  f.coeffs_ = std::move(coeffs);
  return f;
}

LimitFn LimitFn::table(Table t) {
  t.validate(/*cdf_range=*/false);
  LimitFn f;
  f.kind_ = Kind::TableKind;
  f.table_ = std::make_shared<const Table>(std::move(t));
  return f;
}

LimitFn LimitFn::callable(std::function<double(double)> fn) {
  LimitFn f;
  f.kind_ = Kind::Callable;
  f.fn_ = fn;
  f.cum_ = std::make_shared<CumulativeIntegral>(std::move(fn), 0.125, 1e-12);
  return f;
}

LimitFn LimitFn::undefined() {
  LimitFn f;
  f.kind_ = Kind::Undefined;
  return f;
}

double LimitFn::operator()(double x) const {
  if (x <= 0.0) return 0.0;
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Poly: return poly_eval(coeffs_, x);
    case Kind::TableKind: return table_->eval(x);
    case Kind::Callable: return fn_(x);
    case Kind::Undefined: break;
  }
  throw ConfigError("limit function is undefined for this family");
}

double LimitFn::integral(double x) const {
  if (x <= 0.0) return 0.0;
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Poly: return poly_integral(coeffs_, x);
    case Kind::TableKind: return table_->integral(x);
    case Kind::Callable: return cum_->eval(x);
    case Kind::Undefined: break;
  }
  throw ConfigError("limit function is undefined for this family");
}

double LimitFn::inverse(double level) const {
  if (level <= 0.0) return 0.0;
  if (std::isinf(level)) return kInf;
  switch (kind_) {
    case Kind::Zero:
      return kInf;
    case Kind::Poly: {
      // closed forms for the common low degrees, bisection otherwise
      std::size_t deg = coeffs_.size() - 1;
      while (deg > 0 && coeffs_[deg] == 0.0) --deg;
      if (deg == 1) return level / coeffs_[1];
      if (deg == 2 && coeffs_[1] == 0.0) return std::sqrt(level / coeffs_[2]);
      if (deg == 2) {
        const double b = coeffs_[1], a = coeffs_[2];
        return (-b + std::sqrt(b * b + 4.0 * a * level)) / (2.0 * a);
      }
      return monotone_inverse([this](double x) { return poly_eval(coeffs_, x); }, level);
    }
    case Kind::TableKind:
      return table_->inverse(level);
    case Kind::Callable:
      return monotone_inverse(fn_, level);
    case Kind::Undefined:
      break;
  }
  throw ConfigError("limit function is undefined for this family");
}

bool LimitFn::unbounded() const {
  switch (kind_) {
    case Kind::Zero: return false;
    case Kind::Poly: return true;        // some coefficient is positive
    case Kind::TableKind: return false;  // clamped continuation
    case Kind::Callable: return true;    // assumed; inverse() still degrades to +inf
    case Kind::Undefined: return false;
  }
  return false;
}

double LimitFn::max_slope_jump() const {
  return kind_ == Kind::TableKind ? table_->max_slope_jump() : 0.0;
}

std::string LimitFn::describe() const {
  switch (kind_) {
    case Kind::Zero: return "H = 0";
    case Kind::Poly: {
      std::ostringstream os;
      os << "H poly[";
      for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        os << (k ? ", " : "") << coeffs_[k];
      }
      os << "]";
      return os.str();
    }
    case Kind::TableKind: return "H tabulated";
    case Kind::Callable: return "H callable";
    case Kind::Undefined: return "H undefined";
  }
  return "?";
}

// --------------------------------------------------------------------------
// HazardFn

HazardFn HazardFn::poly(std::vector<double> coeffs) {
  if (coeffs.empty()) throw ConfigError("hazard polynomial: need at least one coefficient");
  for (double c : coeffs) {
    if (c < 0.0) throw ConfigError("hazard polynomial: coefficients must be >= 0");
  }
  HazardFn h;
  h.kind_ = Kind::Poly;
  h.coeffs_ = std::move(coeffs);
  return h;
}

HazardFn HazardFn::callable(std::function<double(double)> fn) {
  HazardFn h;
  h.kind_ = Kind::Callable;
  h.fn_ = fn;
  h.cum_ = std::make_shared<CumulativeIntegral>(std::move(fn), 0.125, 1e-12);
  return h;
}

double HazardFn::operator()(double u) const {
  if (u < 0.0) return 0.0;
  return kind_ == Kind::Poly ? poly_eval(coeffs_, u) : fn_(u);
}

double HazardFn::integral(double y) const {
  if (y <= 0.0) return 0.0;
  if (kind_ == Kind::Poly) {
    // int_0^y sum c_k u^k du; note the constant term is allowed for hazards
    double v = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 0;) {
      v = v * y + coeffs_[k] / static_cast<double>(k + 1);
    }
    return v * y;
  }
  return cum_->eval(y);
}

LimitFn HazardFn::limit() const {
  if (kind_ == Kind::Poly) {
    // H(y) = int_0^y h has coefficients shifted up one degree
    std::vector<double> c(coeffs_.size() + 1, 0.0);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
      c[k + 1] = coeffs_[k] / static_cast<double>(k + 1);
    }
    return LimitFn::poly(std::move(c));
  }
  auto self = *this;
  return LimitFn::callable([self](double y) { return self.integral(y); });
}

std::string HazardFn::describe() const {
  if (kind_ == Kind::Callable) return "hazard callable";
  std::ostringstream os;
  os << "hazard poly[";
  for (std::size_t k = 0; k < coeffs_.size(); ++k) os << (k ? ", " : "") << coeffs_[k];
  os << "]";
  return os.str();
}

// --------------------------------------------------------------------------
// PatienceFamily

PatienceFamily PatienceFamily::none() {
  PatienceFamily f;
  f.variant_ = Variant::Unscaled;
  f.cdf_kind_ = CdfKind::Zero;
  f.limit_ = LimitFn::zero();
  return f;
}

PatienceFamily PatienceFamily::unscaled_exponential(double beta) {
  if (!(beta > 0.0)) throw ConfigError("unscaled exponential patience: rate must be > 0");
  PatienceFamily f;
  f.variant_ = Variant::Unscaled;
  f.cdf_kind_ = CdfKind::Exponential;
  f.beta_ = beta;
  f.limit_ = LimitFn::linear(beta);  // H(x) = F'(0) x
  return f;
}

PatienceFamily PatienceFamily::unscaled_power(double alpha) {
  if (!(alpha > 0.0) || alpha >= 1.0) {
    throw ConfigError("unscaled power patience: exponent must lie in (0, 1)");
  }
  PatienceFamily f;
  f.variant_ = Variant::Unscaled;
  f.cdf_kind_ = CdfKind::Power;
  f.alpha_ = alpha;
  f.limit_ = LimitFn::undefined();  // F'(0) = +inf: no scaling limit exists
  return f;
}

PatienceFamily PatienceFamily::hazard_scaled(HazardFn h) {
  PatienceFamily f;
  f.variant_ = Variant::HazardScaled;
  f.hazard_ = h;
  f.limit_ = h.limit();
  return f;
}

PatienceFamily PatienceFamily::capped_limit(LimitFn H) {
  if (!H.defined()) throw ConfigError("capped family: limit function must be defined");
  PatienceFamily f;
  f.variant_ = Variant::CappedLimit;
  f.limit_ = std::move(H);
  return f;
}

PatienceFamily PatienceFamily::external_table(Table F, std::optional<LimitFn> H) {
  F.validate(/*cdf_range=*/true);
  PatienceFamily f;
  f.variant_ = Variant::ExternalTable;
  f.cdf_kind_ = CdfKind::Tabulated;
  f.table_ = std::make_shared<const Table>(std::move(F));
  if (H) {
    f.limit_ = std::move(*H);
  } else {
    // derive the limit slope from the first table segment: H(x) = F'(0) x
    const Table& t = *f.table_;
    f.limit_ = LimitFn::linear((t.y[1] - t.y[0]) / (t.x[1] - t.x[0]));
  }
  return f;
}

double PatienceFamily::unscaled_cdf(double x) const {
  if (x <= 0.0) return 0.0;
  switch (cdf_kind_) {
    case CdfKind::Zero: return 0.0;
    case CdfKind::Exponential: return -std::expm1(-beta_ * x);
    case CdfKind::Power: return std::min(1.0, std::pow(x, alpha_));
    case CdfKind::Tabulated: return table_->eval(x);
  }
  throw std::logic_error("unreachable cdf kind");
}

double PatienceFamily::unscaled_quantile(double u) const {
  switch (cdf_kind_) {
    case CdfKind::Zero: return kInf;
    case CdfKind::Exponential: return -std::log1p(-u) / beta_;
    case CdfKind::Power: return std::pow(u, 1.0 / alpha_);
    case CdfKind::Tabulated: return table_->inverse(u);
  }
  throw std::logic_error("unreachable cdf kind");
}

double PatienceFamily::cdf(std::int64_t n, double x) const {
  if (n < 1) throw ConfigError("patience cdf: n must be >= 1");
  if (x <= 0.0) return 0.0;
  const double s = std::sqrt(static_cast<double>(n));
  switch (variant_) {
    case Variant::Unscaled:
    case Variant::ExternalTable:
      return unscaled_cdf(x);
    case Variant::HazardScaled:
      // 1 - exp(-int_0^x h(sqrt(n) u) du) with the integral in limit-fn form
      return -std::expm1(-limit_(s * x) / s);
    case Variant::CappedLimit:
      return std::min(limit_(s * x), s) / s;
  }
  throw std::logic_error("unreachable patience variant");
}

double PatienceFamily::scaled_cdf(std::int64_t n, double x) const {
  if (n < 1) throw ConfigError("patience cdf: n must be >= 1");
  if (x <= 0.0) return 0.0;
  const double s = std::sqrt(static_cast<double>(n));
  switch (variant_) {
    case Variant::Unscaled:
    case Variant::ExternalTable:
      return s * unscaled_cdf(x / s);
    case Variant::HazardScaled:
      // s * (1 - exp(-H(x)/s)); expm1 keeps the O(H^2/s) gap resolvable
      return -s * std::expm1(-limit_(x) / s);
    case Variant::CappedLimit:
      return std::min(limit_(x), s);
  }
  throw std::logic_error("unreachable patience variant");
}

double PatienceFamily::quantile(std::int64_t n, double u) const {
  if (n < 1) throw ConfigError("patience quantile: n must be >= 1");
  if (!(u >= 0.0) || u > 1.0) throw ConfigError("patience quantile: u must lie in [0, 1]");
  if (u <= 0.0) return 0.0;
  const double s = std::sqrt(static_cast<double>(n));
  switch (variant_) {
    case Variant::Unscaled:
    case Variant::ExternalTable:
      return unscaled_quantile(u);
    case Variant::HazardScaled:
      // F^n(x) >= u  <=>  H(sqrt(n) x) >= -sqrt(n) log(1-u)
      return limit_.inverse(-s * std::log1p(-u)) / s;
    case Variant::CappedLimit:
      // F^n(x) >= u  <=>  H(sqrt(n) x) >= sqrt(n) u
      return limit_.inverse(s * u) / s;
  }
  throw std::logic_error("unreachable patience variant");
}

double PatienceFamily::sample(std::int64_t n, Rng& rng) const {
  return quantile(n, rng.uniform());
}

std::string PatienceFamily::describe() const {
  std::ostringstream os;
  switch (variant_) {
    case Variant::Unscaled:
      switch (cdf_kind_) {
        case CdfKind::Zero: os << "patience none"; break;
        case CdfKind::Exponential: os << "unscaled exponential patience, rate " << beta_; break;
        case CdfKind::Power: os << "unscaled power patience, exponent " << alpha_; break;
        case CdfKind::Tabulated: os << "unscaled tabulated patience"; break;
      }
      break;
    case Variant::HazardScaled:
      os << "hazard-scaled patience (" << hazard_->describe() << ")";
      break;
    case Variant::CappedLimit:
      os << "capped-limit patience (" << limit_.describe() << ")";
      break;
    case Variant::ExternalTable:
      os << "external-table patience (" << table_->x.size() << " rows)";
      break;
  }
  return os.str();
}

// --------------------------------------------------------------------------
// assumption checks

ScalingLimitReport check_scaling_limit(const PatienceFamily& fam, double K,
                                       const std::vector<std::int64_t>& n_list,
                                       std::size_t grid_points) {
  if (!(K > 0.0)) throw ConfigError("scaling-limit check: K must be > 0");
  if (grid_points < 2) throw ConfigError("scaling-limit check: need at least 2 grid points");
  if (!fam.limit().defined()) {
    throw ConfigError("scaling-limit check: family has no defined limit function");
  }
  ScalingLimitReport rep;
  rep.n_list = n_list;
  rep.grid_hi = K;
  rep.grid_points = grid_points;
  rep.sup_error.reserve(n_list.size());
  for (std::int64_t n : n_list) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
      const double x = K * static_cast<double>(i) / static_cast<double>(grid_points - 1);
      const double err = std::abs(fam.scaled_cdf(n, x) - fam.limit()(x));
      worst = std::max(worst, err);
    }
    rep.sup_error.push_back(worst);
  }
  for (std::size_t i = 1; i < rep.sup_error.size(); ++i) {
    if (rep.sup_error[i] > rep.sup_error[i - 1] + 1e-12) {
      rep.errors_nonincreasing = false;
    }
  }
  return rep;
}

StabilityReport check_stability(const PatienceFamily& fam, double theta,
                                double lambda, double x_max) {
  if (!(lambda > 0.0)) throw ConfigError("stability check: lambda must be > 0");
  if (!(x_max > 0.0)) throw ConfigError("stability check: x_max must be > 0");
  if (!fam.limit().defined()) {
    throw ConfigError("stability check: family has no defined limit function");
  }
  StabilityReport rep;
  rep.x_max = x_max;
  rep.margin = fam.limit()(x_max) - theta / lambda;
  rep.satisfied = rep.margin > 0.0;
  return rep;
}

}  // namespace abq
