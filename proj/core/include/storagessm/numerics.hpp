#pragma once

#include <cmath>
#include <numbers>
#include <optional>

namespace storagessm {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }
inline double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }
// Inverse of the standard normal cdf; u must lie in (0, 1).
double normal_quantile(double u);

inline double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return normal_log_pdf(z) - std::log(sd);
}

// Brent's root finder on a bracket [a, b] with f(a) and f(b) of opposite sign
// (or one of them zero). Returns nullopt when the bracket is invalid or the
// iteration cap is hit.
template <class F>
std::optional<double> brent_root(F&& f, double a, double b, double fa, double fb, double tol,
                                 int max_iter = 200) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) return std::nullopt;
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * 1e-16 * std::abs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
      const double min2 = std::abs(e * q);
      if (2.0 * p < (min1 < min2 ? min1 : min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm >= 0.0 ? tol1 : -tol1);
    fb = f(b);
  }
  return std::nullopt;
}

}  // namespace storagessm
