#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "hybridq/rng.hpp"
#include "hybridq/welford.hpp"
#include "oracles.hpp"

using namespace hybridq;

TEST_CASE("welford hand-computable cases") {
  WelfordState w(1);
  for (double x : {1.0, 2.0, 3.0}) w.update({x});
  CHECK(w.count() == 3);
  CHECK(w.mean()[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(w.m2()[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(w.variance()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  WelfordState c(2);
  for (int i = 0; i < 100; ++i) c.update({4.2, -1.0});
  CHECK(c.variance()[0] == 0.0);
  CHECK(c.variance()[1] == 0.0);

  CHECK_THROWS_AS(w.update({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("welford matches two-pass statistics") {
  Rng rng(8);
  std::vector<double> xs(10000);
  WelfordState w(1);
  for (auto& x : xs) {
    x = rng.normal(3.0, 2.0);
    w.update({x});
  }
  const auto tp = oracles::two_pass(xs);
  CHECK(std::fabs(w.mean()[0] - tp.mean) / std::fabs(tp.mean) < 1e-9);
  CHECK(std::fabs(w.variance()[0] - tp.variance) / tp.variance < 1e-9);
}

TEST_CASE("welford is stable in the catastrophic-cancellation regime") {
  // Large common mean, small variance: the naive sum-of-squares approach
  // loses everything here; Welford must stay within 1e-9 relative.
  Rng rng(88);
  std::vector<double> xs(1'000'000);
  WelfordState w(1);
  for (auto& x : xs) {
    x = 1e6 + rng.normal();
    w.update({x});
  }
  const auto tp = oracles::two_pass(xs);
  CHECK(std::fabs(w.mean()[0] - tp.mean) / std::fabs(tp.mean) < 1e-9);
  CHECK(std::fabs(w.variance()[0] - tp.variance) / tp.variance < 1e-9);
}

TEST_CASE("normalize") {
  WelfordState w(1);
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) w.update({rng.normal(10.0, 2.0)});
  const double mu = w.mean()[0];
  const double sigma = std::sqrt(w.variance()[0]);

  CHECK(w.normalize({mu})[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.normalize({mu + sigma})[0] == doctest::Approx(1.0).epsilon(1e-4));

  // Degenerate stream: sigma = 0 so the raw value is 1/eps = 1e7; the clip
  // bound is what comes out.
  WelfordState flat(1);
  for (int i = 0; i < 10; ++i) flat.update({2.0});
  CHECK(flat.normalize({3.0})[0] == 5.0);
  CHECK(flat.normalize({3.0}, 8.0)[0] == 8.0);
  CHECK(flat.normalize({1.0})[0] == -5.0);

  WelfordState empty(1);
  CHECK_THROWS_AS(empty.normalize({1.0}), std::runtime_error);
}

TEST_CASE("normalization is shift/scale consistent") {
  Rng rng(12);
  std::vector<double> xs(4000);
  for (auto& x : xs) x = rng.normal(0.5, 1.5);

  WelfordState plain(1), affine(1);
  const double a = 3.0, b = -7.0;
  for (double x : xs) {
    plain.update({x});
    affine.update({a * x + b});
  }
  for (double probe : {-1.0, 0.0, 0.42, 2.0}) {
    const double z1 = plain.normalize({probe})[0];
    const double z2 = affine.normalize({a * probe + b})[0];
    CHECK(std::fabs(z1 - z2) < 1e-6);
  }
}

TEST_CASE("welford serialization round trip") {
  WelfordState w(3);
  Rng rng(4);
  for (int i = 0; i < 321; ++i) w.update({rng.normal(), rng.normal(2.0, 0.1), rng.uniform()});
  std::stringstream ss;
  w.save(ss);
  WelfordState loaded;
  loaded.load(ss);
  CHECK(loaded == w);
}
