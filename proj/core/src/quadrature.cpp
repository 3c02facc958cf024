#include "abandonq/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace abq {

namespace {

// Nodes/weights of the 7-point Gauss / 15-point Kronrod pair (positive half;
// the rule is symmetric).  Standard tabulated values.
constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
constexpr double kWgk[8] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694};

struct Gk15 {
  double kronrod;
  double err;  // |kronrod - gauss| based estimate
};

Gk15 gk15(const std::function<double(double)>& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);

  const double fc = f(mid);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;

  double fv[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    fv[j] = f1 + f2;
    resk += kWgk[j] * fv[j];
  }
  for (int j = 0; j < 3; ++j) resg += kWg[j] * fv[2 * j + 1];

  const double kron = resk * h;
  const double gauss = resg * h;
  double err = std::abs(kron - gauss);
  // classic QUADPACK-style sharpening of the crude |K - G| estimate
  if (err != 0.0) err = std::min(err, 200.0 * err * std::sqrt(err));
  return {kron, err};
}

struct WorkPanel {
  double a, b, integral, err;
};

struct ByError {
  bool operator()(const WorkPanel& x, const WorkPanel& y) const {
    return x.err < y.err;
  }
};

}  // namespace

double gauss_kronrod_15(const std::function<double(double)>& f, double a, double b) {
  return gk15(f, a, b).kronrod;
}

AdaptiveQuadResult adaptive_gauss_kronrod(const std::function<double(double)>& f,
                                          double a, double b, double rel_tol,
                                          double abs_tol, std::size_t max_panels) {
  std::priority_queue<WorkPanel, std::vector<WorkPanel>, ByError> heap;
  auto first = gk15(f, a, b);
  heap.push({a, b, first.kronrod, first.err});
  double total = first.kronrod;
  double total_err = first.err;

  while (heap.size() < max_panels) {
    const double tol = abs_tol + rel_tol * std::abs(total);
    if (total_err <= tol) break;
    WorkPanel worst = heap.top();
    if (worst.err <= tol / std::max<double>(1, heap.size()) ||
        worst.b - worst.a < 1e-15 * (std::abs(worst.a) + 1.0)) {
      break;  // no further progress possible on the dominant panel
    }
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    auto left = gk15(f, worst.a, m);
    auto right = gk15(f, m, worst.b);
    total += left.kronrod + right.kronrod - worst.integral;
    total_err += left.err + right.err - worst.err;
    heap.push({worst.a, m, left.kronrod, left.err});
    heap.push({m, worst.b, right.kronrod, right.err});
  }

  if (total_err > abs_tol + rel_tol * std::abs(total) && heap.size() >= max_panels) {
    throw QuadratureError("adaptive_gauss_kronrod: panel budget exhausted before tolerance");
  }

  AdaptiveQuadResult out;
  out.error_estimate = total_err;
  out.panels.reserve(heap.size());
  while (!heap.empty()) {
    const WorkPanel& p = heap.top();
    out.panels.push_back({p.a, p.b, p.integral});
    heap.pop();
  }
  std::sort(out.panels.begin(), out.panels.end(),
            [](const QuadPanel& x, const QuadPanel& y) { return x.a < y.a; });
  // re-add in spatial order: slightly better summation than heap order
  Kahan sum;
  for (const auto& p : out.panels) sum.add(p.integral);
  out.value = sum.value();
  return out;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   std::size_t& budget) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || b - a < 1e-14 * (std::abs(a) + 1.0)) {
    return left + right + delta / 15.0;
  }
  if (budget == 0) {
    throw QuadratureError("adaptive_simpson: subdivision budget exhausted");
  }
  --budget;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, budget) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, budget);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, std::size_t max_subdiv) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  std::size_t budget = max_subdiv;
  return simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, budget);
}

}  // namespace abq
