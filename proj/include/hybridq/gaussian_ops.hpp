#pragma once

#include <cmath>
#include <stdexcept>

#include "hybridq/special.hpp"

// Closed-form expectations of min/max operators over Gaussian pairs and of
// nested min/max over two independent such pairs. These are the building
// blocks of every bias expression in bias.hpp.

namespace hybridq {

// X ~ N(mu1, sigma^2), Y ~ N(mu2, sigma^2), independent, shared sigma.
struct GaussianPair {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double sigma = 1.0;

  void validate() const {
    if (!(sigma > 0.0)) throw std::domain_error("GaussianPair: sigma must be > 0");
    if (!std::isfinite(mu1) || !std::isfinite(mu2) || !std::isfinite(sigma))
      throw std::domain_error("GaussianPair: fields must be finite");
  }
};

// E|Z| for Z ~ N(mu_z, sigma_z^2):
//   sigma_z*sqrt(2/pi)*exp(-mu_z^2/(2 sigma_z^2)) + mu_z*erf(mu_z/(sqrt(2) sigma_z))
inline double expected_abs_gaussian(double mu_z, double sigma_z) {
  if (!(sigma_z > 0.0)) throw std::domain_error("expected_abs_gaussian: sigma_z must be > 0");
  const double a = mu_z / (std::sqrt(2.0) * sigma_z);
  return sigma_z * std::sqrt(2.0 / M_PI) * std::exp(-a * a) + mu_z * erf_local(a);
}

// E[min(X,Y)] = (mu1+mu2)/2 - (sigma/sqrt(pi)) exp(-(mu1-mu2)^2/(4 sigma^2))
//             - ((mu1-mu2)/2) erf((mu1-mu2)/(2 sigma))
inline double expected_min_pair(const GaussianPair& p) {
  p.validate();
  const double d = p.mu1 - p.mu2;
  const double u = d / (2.0 * p.sigma);
  return 0.5 * (p.mu1 + p.mu2) - p.sigma / std::sqrt(M_PI) * std::exp(-u * u) -
         0.5 * d * erf_local(u);
}

// Same with flipped signs on the spread terms.
inline double expected_max_pair(const GaussianPair& p) {
  p.validate();
  const double d = p.mu1 - p.mu2;
  const double u = d / (2.0 * p.sigma);
  return 0.5 * (p.mu1 + p.mu2) + p.sigma / std::sqrt(M_PI) * std::exp(-u * u) +
         0.5 * d * erf_local(u);
}

// E[min(X,Y)^2] = (mu1^2+s^2) Phi(-a) + (mu2^2+s^2) Phi(a) - (mu1+mu2) theta phi(a)
// with theta = s*sqrt(2), a = (mu1-mu2)/theta. Standard second moment of the
// minimum of two independent Gaussians; certified against Monte Carlo in the
// test suite before anything downstream relies on it.
inline double min_pair_second_moment(const GaussianPair& p) {
  p.validate();
  const double theta = p.sigma * std::sqrt(2.0);
  const double a = (p.mu1 - p.mu2) / theta;
  const double s2 = p.sigma * p.sigma;
  return (p.mu1 * p.mu1 + s2) * norm_cdf(-a) + (p.mu2 * p.mu2 + s2) * norm_cdf(a) -
         (p.mu1 + p.mu2) * theta * norm_pdf(a);
}

inline double min_pair_std(const GaussianPair& p) {
  const double mu_w = expected_min_pair(p);
  const double var = min_pair_second_moment(p) - mu_w * mu_w;
  return std::sqrt(var > 0.0 ? var : 0.0);
}

// Nested operators: W1 = min(X,Y), W2 = min(E,F) with (E,F) an independent
// copy. E[min(W1,W2)] = mu_w - sigma_w/sqrt(pi), treating W as Gaussian with
// the exact moments of min(X,Y). This inherits the Gaussian approximation of
// the source derivation; the true nested expectation differs by O(1e-3 sigma).
inline double expected_nested_min(const GaussianPair& p) {
  return expected_min_pair(p) - min_pair_std(p) / std::sqrt(M_PI);
}

inline double expected_nested_max(const GaussianPair& p) {
  return expected_min_pair(p) + min_pair_std(p) / std::sqrt(M_PI);
}

}  // namespace hybridq
