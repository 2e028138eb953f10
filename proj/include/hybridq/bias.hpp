#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridq/gaussian_ops.hpp"
#include "hybridq/special.hpp"

// Closed-form expected estimation bias of the Bellman target for the five
// hybrid action variants, plus the Blom order-statistic machinery behind the
// quantile-truncation coefficients.

namespace hybridq {

enum class Variant { kHybridTd3, kHyDatd3, kHyDarc, kHyTqc, kHyAcc };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kHybridTd3: return "hybrid_td3";
    case Variant::kHyDatd3: return "hydatd3";
    case Variant::kHyDarc: return "hydarc";
    case Variant::kHyTqc: return "hytqc";
    case Variant::kHyAcc: return "hyacc";
  }
  return "?";
}

// Blom approximation for the expected i-th order statistic of n i.i.d.
// standard normals: Phi^{-1}((i - 0.375) / (n + 0.25)).
inline double blom_quantile(int i, int n) {
  if (n < 1 || i < 1 || i > n) throw std::domain_error("blom_quantile: need 1 <= i <= n");
  return norm_cdf_inv((i - 0.375) / (n + 0.25));
}

namespace detail {
inline double mean_of_lowest_blom(int kept, int pool) {
  double sum = 0.0;
  for (int i = 1; i <= kept; ++i) sum += blom_quantile(i, pool);
  return sum / kept;
}
}  // namespace detail

// Mean of the lowest k*N Blom quantiles out of a pool of N*M atoms. Negative
// whenever the kept set excludes enough of the upper tail; strictly
// increasing in k.
inline double tqc_truncation_coefficient(int k_atoms, int n_critics, int m_atoms) {
  if (k_atoms < 1 || n_critics < 1 || m_atoms < 1)
    throw std::domain_error("tqc_truncation_coefficient: counts must be >= 1");
  if (k_atoms > m_atoms)
    throw std::domain_error("tqc_truncation_coefficient: k_atoms must be <= m_atoms");
  return detail::mean_of_lowest_blom(k_atoms * n_critics, n_critics * m_atoms);
}

// Same with beta additional top quantiles removed: mean of the lowest
// k*N - beta atoms. Equals the TQC coefficient at beta = 0.
inline double acc_truncation_coefficient(int k_atoms, int n_critics, int m_atoms, int beta) {
  if (k_atoms < 1 || n_critics < 1 || m_atoms < 1)
    throw std::domain_error("acc_truncation_coefficient: counts must be >= 1");
  if (k_atoms > m_atoms)
    throw std::domain_error("acc_truncation_coefficient: k_atoms must be <= m_atoms");
  if (beta < 0) throw std::domain_error("acc_truncation_coefficient: beta must be >= 0");
  const int kept = k_atoms * n_critics - beta;
  if (kept < 1) throw std::domain_error("acc_truncation_coefficient: k*N - beta must be >= 1");
  return detail::mean_of_lowest_blom(kept, n_critics * m_atoms);
}

// Parameter bundle feeding every closed-form bias expression. mu and sigma
// describe the synchronized critic error N(mu, sigma^2); p_d is the discrete
// policy; lambda mixes pessimistic/optimistic targets; (k, N, M, beta)
// configure the quantile variants.
struct BiasModel {
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<double> p_d = {0.5, 0.5};
  double lambda = 0.7;
  int k_atoms = 22;
  int n_critics = 5;
  int m_atoms = 25;
  int beta = 2;

  void validate() const {
    if (!(sigma > 0.0)) throw std::domain_error("BiasModel: sigma must be > 0");
    if (!std::isfinite(mu)) throw std::domain_error("BiasModel: mu must be finite");
    if (lambda < 0.0 || lambda > 1.0) throw std::domain_error("BiasModel: lambda in [0,1]");
    if (p_d.empty()) throw std::domain_error("BiasModel: p_d must be nonempty");
    double sum = 0.0;
    for (double p : p_d) {
      if (p < 0.0) throw std::domain_error("BiasModel: p_d entries must be >= 0");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw std::domain_error("BiasModel: p_d must sum to 1");
    if (k_atoms < 1 || n_critics < 1 || m_atoms < 1 || beta < 0)
      throw std::domain_error("BiasModel: counts out of range");
    if (k_atoms > m_atoms) throw std::domain_error("BiasModel: k_atoms must be <= m_atoms");
    if (beta >= k_atoms * n_critics)
      throw std::domain_error("BiasModel: beta must be < k_atoms * n_critics");
  }

  double sum_p_squared() const {
    return std::inner_product(p_d.begin(), p_d.end(), p_d.begin(), 0.0);
  }

  // tau = sigma * sqrt((1 - 1/pi) * sum_k p_d(k)^2): the std of the
  // p_d-weighted sum of per-mode clipped minima.
  double tau() const { return sigma * std::sqrt((1.0 - 1.0 / M_PI) * sum_p_squared()); }
};

// Expected estimation bias delta-Q of the named variant's Bellman target.
//   HybridTD3: mu - sigma/sqrt(pi)
//   HyDATD3:   mu - sigma/sqrt(pi) + tau/sqrt(pi)
//     (sign follows E[max(eta1, eta2)]; the reference expression carries an
//      extra overall minus that contradicts that expectation)
//   HyDARC:    mu - sigma/sqrt(pi) + (tau/sqrt(pi)) (1 - 2 lambda)
//   HyTQC:     mu + sigma * tqc_truncation_coefficient
//   HyACC:     mu + sigma * acc_truncation_coefficient
inline double variant_bias(const BiasModel& m, Variant v) {
  m.validate();
  const double sqrt_pi = std::sqrt(M_PI);
  const double clipped_min = m.mu - m.sigma / sqrt_pi;
  switch (v) {
    case Variant::kHybridTd3:
      return clipped_min;
    case Variant::kHyDatd3:
      return clipped_min + m.tau() / sqrt_pi;
    case Variant::kHyDarc:
      return clipped_min + m.tau() / sqrt_pi * (1.0 - 2.0 * m.lambda);
    case Variant::kHyTqc:
      return m.mu + m.sigma * tqc_truncation_coefficient(m.k_atoms, m.n_critics, m.m_atoms);
    case Variant::kHyAcc:
      return m.mu + m.sigma * acc_truncation_coefficient(m.k_atoms, m.n_critics, m.m_atoms,
                                                         m.beta);
  }
  throw std::logic_error("variant_bias: unknown variant");
}

// Five biases plus the ordering verdict:
//   hybrid_td3 < hyacc ~= hytqc < hydarc < hydatd3
// with "~=" meaning |hyacc - hytqc| <= tie_tol. ordering_satisfied reports
// whether every comparison in that chain holds for the given model.
struct BiasReport {
  double hybrid_td3 = 0.0;
  double hydatd3 = 0.0;
  double hydarc = 0.0;
  double hytqc = 0.0;
  double hyacc = 0.0;
  double tie_tol = 0.0;
  bool ordering_satisfied = false;
};

constexpr double kDefaultOrderingTieTolFactor = 0.05;  // tie_tol = factor * sigma

inline BiasReport ordering_report(const BiasModel& m,
                                  double tie_tol_factor = kDefaultOrderingTieTolFactor) {
  m.validate();
  // Regime analyzed by the source derivation; outside it the chain is not
  // even claimed.
  if (!(m.lambda > 0.5))
    throw std::domain_error("ordering_report: requires lambda > 0.5");
  BiasReport r;
  r.hybrid_td3 = variant_bias(m, Variant::kHybridTd3);
  r.hydatd3 = variant_bias(m, Variant::kHyDatd3);
  r.hydarc = variant_bias(m, Variant::kHyDarc);
  r.hytqc = variant_bias(m, Variant::kHyTqc);
  r.hyacc = variant_bias(m, Variant::kHyAcc);
  r.tie_tol = tie_tol_factor * m.sigma;
  const double lo = std::min(r.hyacc, r.hytqc);
  const double hi = std::max(r.hyacc, r.hytqc);
  r.ordering_satisfied = r.hybrid_td3 < lo && std::fabs(r.hyacc - r.hytqc) <= r.tie_tol &&
                         hi < r.hydarc && r.hydarc < r.hydatd3;
  return r;
}

}  // namespace hybridq
