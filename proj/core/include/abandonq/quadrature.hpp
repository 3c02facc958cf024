#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace abq {

// Compensated (Kahan) accumulator.  Used for the long time-integral sums in
// the simulator, where 1e7+ small increments land on an O(1) total.
struct Kahan {
  double sum = 0.0;
  double c = 0.0;

  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

class QuadratureError : public std::runtime_error {
 public:
  explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

// Adaptive Simpson with absolute tolerance and a hard cap on subdivisions.
// Good enough for the short, smooth hazard integrals it is used on; throws
// QuadratureError if the cap is reached before the tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-10, std::size_t max_subdiv = 1000000);

// One refined panel of an adaptive Gauss-Kronrod integration, kept around so
// cumulative integrals (CDF evaluation) can reuse the subdivision.
struct QuadPanel {
  double a;
  double b;
  double integral;  // 15-point Kronrod value on [a, b]
};

struct AdaptiveQuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::vector<QuadPanel> panels;  // sorted by left endpoint, contiguous
};

// Adaptive Gauss-Kronrod (7-15) on [a, b].  Splits the worst panel until the
// summed error estimate meets  abs_tol + rel_tol * |integral|, or throws when
// the panel budget runs out.
AdaptiveQuadResult adaptive_gauss_kronrod(const std::function<double(double)>& f,
                                          double a, double b, double rel_tol = 1e-10,
                                          double abs_tol = 0.0,
                                          std::size_t max_panels = 100000);

// Single 15-point Kronrod evaluation on [a, b] (no refinement); used for the
// partial panel at the right edge of a cumulative integral.
double gauss_kronrod_15(const std::function<double(double)>& f, double a, double b);

}  // namespace abq
