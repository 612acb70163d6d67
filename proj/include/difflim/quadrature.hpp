#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace difflim::quad {

namespace detail {

template <class F>
double simpson_refine(F& f, double a, double fa, double m, double fm, double b, double fb,
                      double whole, double tol, int depth, int min_depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(left + right);
  if (depth <= 0 || (min_depth <= 0 && std::abs(delta) <= 15.0 * std::max(tol, floor))) {
    return left + right + delta / 15.0;
  }
  return simpson_refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, min_depth - 1) +
         simpson_refine(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, min_depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction. Works for b < a (returns the
// signed integral). Bisection stops when the local estimate is within tol
// (or within a few ulps of the local value) or max_depth is reached; min_depth forces that many initial bisections.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 30,
                        int min_depth = 1) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_refine(f, a, fa, m, fm, b, fb, whole, std::abs(tol), max_depth,
                                min_depth);
}

}  // namespace difflim::quad
