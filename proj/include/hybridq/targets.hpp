#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hybridq/tensor.hpp"

// Bellman target rules for every variant, as pure functions of critic values.
// Keeping these free of network plumbing lets the same code path serve both
// the agents and the synthetic-error bridge that ties the implementations to
// the closed-form bias analysis.

namespace hybridq {

// The literal weighted target carries both a 1/K factor and the pi_d weights
// (which already sum to one). kAsWritten keeps the literal 1/K; kExpectation
// drops it so the weights alone marginalize.
enum class TargetWeighting { kAsWritten, kExpectation };

namespace target_detail {
inline void check_rows(const Tensor& t, int rows, int cols, const char* what) {
  if (t.shape.size() != 2 || t.rows() != rows || t.cols() != cols)
    throw std::invalid_argument(std::string("target: bad shape for ") + what);
}
}  // namespace target_detail

// y = r + gamma * (1 - done) * min_i q_i(s', a'_c, a'_d) with the discrete
// action chosen greedily under pi_d.
inline std::vector<double> td3_target_greedy(const std::vector<double>& r,
                                             const std::vector<std::uint8_t>& done, double gamma,
                                             const Tensor& q1, const Tensor& q2,
                                             const Tensor& pi_d) {
  const int n = static_cast<int>(r.size());
  const int k = q1.cols();
  target_detail::check_rows(q1, n, k, "q1");
  target_detail::check_rows(q2, n, k, "q2");
  target_detail::check_rows(pi_d, n, k, "pi_d");
  std::vector<double> y(n);
  for (int row = 0; row < n; ++row) {
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (pi_d.at(row, j) > pi_d.at(row, best)) best = j;
    const double q = std::min(q1.at(row, best), q2.at(row, best));
    y[row] = r[row] + gamma * (done[row] ? 0.0 : q);
  }
  return y;
}

// Weighted clipped target: the clipped minimum is marginalized over pi_d
// instead of committing to the greedy mode.
inline std::vector<double> weighted_clipped_target(const std::vector<double>& r,
                                                   const std::vector<std::uint8_t>& done,
                                                   double gamma, const Tensor& q1,
                                                   const Tensor& q2, const Tensor& pi_d,
                                                   TargetWeighting weighting) {
  const int n = static_cast<int>(r.size());
  const int k = q1.cols();
  target_detail::check_rows(q1, n, k, "q1");
  target_detail::check_rows(q2, n, k, "q2");
  target_detail::check_rows(pi_d, n, k, "pi_d");
  const double scale = weighting == TargetWeighting::kAsWritten ? 1.0 / k : 1.0;
  std::vector<double> y(n);
  for (int row = 0; row < n; ++row) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j)
      acc += pi_d.at(row, j) * std::min(q1.at(row, j), q2.at(row, j));
    y[row] = r[row] + gamma * (done[row] ? 0.0 : scale * acc);
  }
  return y;
}

// The pi_d-weighted clipped minimum for one candidate continuous action: the
// T(a'_c) aggregation shared by the DATD3 and DARC rules.
inline std::vector<double> weighted_min_aggregate(const Tensor& q1, const Tensor& q2,
                                                  const Tensor& pi_d) {
  const int n = q1.rows(), k = q1.cols();
  target_detail::check_rows(q2, n, k, "q2");
  target_detail::check_rows(pi_d, n, k, "pi_d");
  std::vector<double> t(n);
  for (int row = 0; row < n; ++row) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j)
      acc += pi_d.at(row, j) * std::min(q1.at(row, j), q2.at(row, j));
    t[row] = acc;
  }
  return t;
}

// DATD3: evaluate two independently smoothed candidate actions and keep the
// more optimistic aggregate. qXa/qXb are critic values at candidates a and b.
inline std::vector<double> datd3_target(const std::vector<double>& r,
                                        const std::vector<std::uint8_t>& done, double gamma,
                                        const Tensor& q1a, const Tensor& q2a, const Tensor& q1b,
                                        const Tensor& q2b, const Tensor& pi_d) {
  const auto ta = weighted_min_aggregate(q1a, q2a, pi_d);
  const auto tb = weighted_min_aggregate(q1b, q2b, pi_d);
  std::vector<double> y(r.size());
  for (std::size_t row = 0; row < r.size(); ++row)
    y[row] = r[row] + gamma * (done[row] ? 0.0 : std::max(ta[row], tb[row]));
  return y;
}

// DARC: convex mix of the pessimistic and optimistic candidate aggregates.
// lambda = 1 is the pure minimum, lambda = 0 the pure maximum.
inline std::vector<double> darc_target(const std::vector<double>& r,
                                       const std::vector<std::uint8_t>& done, double gamma,
                                       const Tensor& q1a, const Tensor& q2a, const Tensor& q1b,
                                       const Tensor& q2b, const Tensor& pi_d, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("darc_target: lambda in [0,1]");
  const auto ta = weighted_min_aggregate(q1a, q2a, pi_d);
  const auto tb = weighted_min_aggregate(q1b, q2b, pi_d);
  std::vector<double> y(r.size());
  for (std::size_t row = 0; row < r.size(); ++row) {
    const double lo = std::min(ta[row], tb[row]);
    const double hi = std::max(ta[row], tb[row]);
    y[row] = r[row] + gamma * (done[row] ? 0.0 : lambda * lo + (1.0 - lambda) * hi);
  }
  return y;
}

// TQC/ACC: pool the atoms of all target critics at (s', a'_c, a'_d), sort,
// and average the lowest `kept`. entropy_bonus (may be zero) carries the
// SAC-style -alpha log-prob terms.
inline std::vector<double> quantile_truncation_target(const std::vector<double>& r,
                                                      const std::vector<std::uint8_t>& done,
                                                      double gamma, const Tensor& atoms, int kept,
                                                      const std::vector<double>& entropy_bonus) {
  const int n = static_cast<int>(r.size());
  const int pool = atoms.cols();
  target_detail::check_rows(atoms, n, pool, "atoms");
  if (kept < 1 || kept > pool)
    throw std::invalid_argument("quantile_truncation_target: kept out of range");
  std::vector<double> y(n);
  std::vector<double> scratch(pool);
  for (int row = 0; row < n; ++row) {
    const double* src = &atoms.data[static_cast<std::size_t>(row) * pool];
    std::copy(src, src + pool, scratch.begin());
    std::nth_element(scratch.begin(), scratch.begin() + kept, scratch.end());
    double acc = 0.0;
    for (int i = 0; i < kept; ++i) acc += scratch[i];
    const double value = acc / kept + entropy_bonus[row];
    y[row] = r[row] + gamma * (done[row] ? 0.0 : value);
  }
  return y;
}

}  // namespace hybridq
