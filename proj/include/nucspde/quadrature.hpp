#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace nucspde {

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction; `pieces` presplits [a,b]
// so kinks at known points (grid nodes) do not stall the recursion.
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                                 int pieces = 1, int max_depth = 40) {
  if (!(b >= a)) throw std::domain_error("integration bounds out of order");
  if (a == b) return 0.0;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces;
    const double hi = (i + 1 == pieces) ? b : a + (b - a) * (i + 1) / pieces;
    const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += detail::simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / pieces, max_depth);
  }
  return total;
}

}  // namespace nucspde
