#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Error function, normal CDF and its inverse, implemented locally so results
// are bit-reproducible across toolchains. erf uses the confluent
// hypergeometric series for small |x| and a Lentz continued fraction for the
// complementary function at large |x|; the inverse CDF is a plain bisection.

namespace hybridq {

namespace detail {

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_{k>=0} (2x^2)^k x / (1*3*...*(2k+1)).
// All terms positive, no cancellation; converges quickly for |x| <= 3.
inline double erf_series(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  double denom = 1.0;
  for (int k = 1; k < 200; ++k) {
    denom += 2.0;
    term *= 2.0 * x2 / denom;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-18) break;
  }
  return 2.0 / std::sqrt(M_PI) * std::exp(-x2) * sum;
}

// erfc(x) for x > 0 via the continued fraction
//   erfc(x) = exp(-x^2)/(x*sqrt(pi)) * 1/(1 + v/(1 + 2v/(1 + 3v/(1 + ...))))
// with v = 1/(2x^2), evaluated with the modified Lentz algorithm.
inline double erfc_cf(double x) {
  const double v = 1.0 / (2.0 * x * x);
  const double tiny = 1e-300;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int n = 1; n < 400; ++n) {
    const double a = n * v;
    d = 1.0 + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-17) break;
  }
  return std::exp(-x * x) / (x * std::sqrt(M_PI)) / f;
}

}  // namespace detail

inline double erf_local(double x) {
  const double ax = std::fabs(x);
  if (ax <= 3.0) return detail::erf_series(x);
  const double tail = ax > 27.0 ? 0.0 : detail::erfc_cf(ax);
  return x > 0.0 ? 1.0 - tail : tail - 1.0;
}

inline double erfc_local(double x) {
  const double ax = std::fabs(x);
  if (ax <= 3.0) return 1.0 - detail::erf_series(x);
  const double tail = ax > 27.0 ? 0.0 : detail::erfc_cf(ax);
  return x > 0.0 ? tail : 2.0 - tail;
}

// Standard normal CDF and PDF.
inline double norm_cdf(double z) { return 0.5 * erfc_local(-z / std::sqrt(2.0)); }

inline double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

// Inverse standard normal CDF by bisection to an interval width of 1e-13.
// Absolute accuracy is well below the 1e-7 required on [1e-6, 1 - 1e-6].
inline double norm_cdf_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_cdf_inv: p must be in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -10.0, hi = 10.0;
  while (norm_cdf(lo) > p) lo *= 2.0;
  while (norm_cdf(hi) < p) hi *= 2.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (norm_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace hybridq
