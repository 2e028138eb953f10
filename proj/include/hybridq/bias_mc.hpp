#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hybridq/bias.hpp"
#include "hybridq/rng.hpp"

// Monte Carlo oracle for the closed forms in bias.hpp: simulates the exact
// target construction of each variant on i.i.d. N(mu, sigma^2) critic errors
// and reports the sample mean and standard error of the aggregated error
// term. Sampling is sharded with per-shard derived seeds; the result is a
// deterministic function of (model, variant, n_samples, seed, shards).

namespace hybridq {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
};

namespace detail {

struct McAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
};

// One draw of the variant's aggregated target error.
inline double sample_variant_error(const BiasModel& m, Variant v, Rng& rng,
                                   std::vector<double>& scratch) {
  const auto minpair = [&] { return std::min(rng.normal(m.mu, m.sigma), rng.normal(m.mu, m.sigma)); };
  switch (v) {
    case Variant::kHybridTd3: {
      // sum_k p_d(k) * min(eps1_k, eps2_k)
      double acc = 0.0;
      for (double p : m.p_d) acc += p * minpair();
      return acc;
    }
    case Variant::kHyDatd3:
    case Variant::kHyDarc: {
      // Two independent candidate targets eta_j = sum_k p_d(k) min(.,.)
      double eta1 = 0.0, eta2 = 0.0;
      for (double p : m.p_d) eta1 += p * minpair();
      for (double p : m.p_d) eta2 += p * minpair();
      if (v == Variant::kHyDatd3) return std::max(eta1, eta2);
      return m.lambda * std::min(eta1, eta2) + (1.0 - m.lambda) * std::max(eta1, eta2);
    }
    case Variant::kHyTqc:
    case Variant::kHyAcc: {
      const int pool = m.n_critics * m.m_atoms;
      const int kept =
          v == Variant::kHyTqc ? m.k_atoms * m.n_critics : m.k_atoms * m.n_critics - m.beta;
      scratch.resize(pool);
      for (double& x : scratch) x = rng.normal(m.mu, m.sigma);
      // Only the lowest `kept` atoms matter.
      std::nth_element(scratch.begin(), scratch.begin() + kept, scratch.end());
      double acc = 0.0;
      for (int i = 0; i < kept; ++i) acc += scratch[i];
      return acc / kept;
    }
  }
  throw std::logic_error("sample_variant_error: unknown variant");
}

}  // namespace detail

inline McEstimate monte_carlo_bias(const BiasModel& m, Variant v, std::int64_t n_samples,
                                   std::uint64_t seed = 0, int shards = 4) {
  m.validate();
  if (n_samples < 10000) throw std::domain_error("monte_carlo_bias: n_samples must be >= 1e4");
  if (shards < 1) throw std::domain_error("monte_carlo_bias: shards must be >= 1");

  std::vector<detail::McAccumulator> acc(static_cast<std::size_t>(shards));
  const auto run_shard = [&](int shard) {
    Rng rng = derive_rng(seed, "bias_mc", static_cast<std::uint64_t>(v), shard);
    std::vector<double> scratch;
    const std::int64_t lo = n_samples * shard / shards;
    const std::int64_t hi = n_samples * (shard + 1) / shards;
    for (std::int64_t i = lo; i < hi; ++i)
      acc[shard].add(detail::sample_variant_error(m, v, rng, scratch));
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw > 1 && shards > 1) {
    std::vector<std::thread> workers;
    workers.reserve(shards);
    for (int s = 0; s < shards; ++s) workers.emplace_back(run_shard, s);
    for (auto& w : workers) w.join();
  } else {
    for (int s = 0; s < shards; ++s) run_shard(s);
  }

  // Combine in fixed shard order so the reduction is deterministic.
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
  for (const auto& a : acc) {
    sum += a.sum;
    sum_sq += a.sum_sq;
    n += a.n;
  }
  McEstimate e;
  e.n_samples = n;
  e.mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - e.mean * e.mean);
  e.std_error = std::sqrt(var / n);
  return e;
}

}  // namespace hybridq
