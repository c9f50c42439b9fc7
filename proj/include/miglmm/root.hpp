#pragma once

#include <cmath>

namespace miglmm {

struct BisectionResult {
  double root;
  double lower;
  double upper;
  int iterations;
};

/// Bisection for a monotone f with f(lower) and f(upper) of opposite sign
/// (or one of them zero). Stops when the bracket is no wider than width_tol
/// or f hits zero exactly. Caller guarantees the sign change.
template <class F>
BisectionResult bisect(F&& f, double lower, double upper, double width_tol, int max_iter = 200) {
  double f_lower = f(lower);
  if (f_lower == 0.0) return {lower, lower, lower, 0};
  const bool lower_negative = f_lower < 0.0;
  int it = 0;
  while (upper - lower > width_tol && it < max_iter) {
    const double mid = 0.5 * (lower + upper);
    if (mid <= lower || mid >= upper) break;  // no representable midpoint
    const double f_mid = f(mid);
    ++it;
    if (f_mid == 0.0) return {mid, mid, mid, it};
    if ((f_mid < 0.0) == lower_negative) {
      lower = mid;
    } else {
      upper = mid;
    }
  }
  return {0.5 * (lower + upper), lower, upper, it};
}

}  // namespace miglmm
