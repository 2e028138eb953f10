#pragma once

// Test-only oracles. Everything here is independent of the closed forms it
// checks: plain quadrature, brute-force sampling, and two-pass statistics.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "hybridq/rng.hpp"

namespace oracles {

// Composite trapezoid rule.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double acc = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) acc += f(lo + i * h);
  return acc * h;
}

// E|Z| for Z ~ N(mu, sigma^2) by integrating |z| pdf(z) over [-12 sigma, 12 sigma]
// around the mean.
inline double abs_gaussian_by_quadrature(double mu, double sigma) {
  auto integrand = [&](double z) {
    const double u = (z - mu) / sigma;
    return std::fabs(z) * std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * M_PI));
  };
  return trapezoid(integrand, mu - 12.0 * sigma, mu + 12.0 * sigma, 200000);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sample mean and standard error of a sampled statistic.
inline MeanSe mc_mean(const std::function<double(hybridq::Rng&)>& draw, std::int64_t n,
                      std::uint64_t seed) {
  hybridq::Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = draw(rng);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

struct TwoPassStats {
  double mean = 0.0;
  double variance = 0.0;  // population (divide by n)
};

inline TwoPassStats two_pass(const std::vector<double>& xs) {
  TwoPassStats s;
  for (double x : xs) s.mean += x;
  s.mean /= xs.size();
  for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= xs.size();
  return s;
}

}  // namespace oracles
