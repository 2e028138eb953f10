#include <sstream>
#include <vector>

#include "doctest.h"
#include "hybridq/replay.hpp"
#include "hybridq/rng.hpp"

using namespace hybridq;

namespace {
Transition make(int tag) {
  Transition t;
  t.s = {static_cast<double>(tag), 0.0};
  t.a_d = tag % 2;
  t.a_c = {0.1 * tag};
  t.r = tag * 1.0;
  t.s_next = {static_cast<double>(tag + 1), 0.0};
  t.done = false;
  return t;
}
}  // namespace

TEST_CASE("push, saturation, FIFO overwrite") {
  ReplayBuffer buf(3, 2, 1);
  CHECK(buf.size() == 0);
  buf.push(make(0));
  CHECK(buf.size() == 1);
  buf.push(make(1));
  buf.push(make(2));
  CHECK(buf.size() == 3);

  buf.push(make(3));  // overwrites the oldest slot
  CHECK(buf.size() == 3);
  CHECK(buf.get(0).r == 3.0);
  CHECK(buf.get(1).r == 1.0);
  CHECK(buf.get(2).r == 2.0);
  buf.push(make(4));
  CHECK(buf.get(1).r == 4.0);

  Transition bad = make(5);
  bad.s = {1.0};
  CHECK_THROWS_AS(buf.push(bad), std::invalid_argument);
}

TEST_CASE("sampling") {
  ReplayBuffer buf(16, 2, 1);
  buf.push(make(7));

  Rng rng(3);
  const auto batch = buf.sample(5, rng);
  for (int i = 0; i < 5; ++i) {
    CHECK(batch.r[i] == 7.0);
    CHECK(batch.s.at(i, 0) == 7.0);
  }

  // Only an empty buffer is an error; with-replacement sampling repeats
  // entries when batch exceeds size.
  ReplayBuffer empty(4, 2, 1);
  CHECK_THROWS_AS(empty.sample(2, rng), std::runtime_error);

  // Deterministic index sequence for a fixed rng state.
  for (int t = 0; t < 9; ++t) buf.push(make(t));
  Rng a(11), b(11);
  CHECK(buf.sample_indices(32, a) == buf.sample_indices(32, b));
}

TEST_CASE("sampling is uniform") {
  ReplayBuffer buf(10, 2, 1);
  for (int t = 0; t < 10; ++t) buf.push(make(t));
  Rng rng(21);
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  for (int i : buf.sample_indices(draws, rng)) ++counts[i];
  // Chi-square against uniform; 21.666 is the df=9 critical value at p=0.01,
  // so statistic below it means p > 0.01.
  const double expected = draws / 10.0;
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  CHECK(stat < 21.666);
}

TEST_CASE("serialization round trip") {
  ReplayBuffer buf(5, 2, 1);
  for (int t = 0; t < 8; ++t) buf.push(make(t));
  std::stringstream ss;
  buf.save(ss);

  ReplayBuffer loaded(5, 2, 1);
  loaded.load(ss);
  CHECK(loaded.size() == buf.size());
  for (int i = 0; i < buf.size(); ++i) {
    CHECK(loaded.get(i).r == buf.get(i).r);
    CHECK(loaded.get(i).s == buf.get(i).s);
  }

  ReplayBuffer wrong(6, 2, 1);
  std::stringstream ss2;
  buf.save(ss2);
  CHECK_THROWS_AS(wrong.load(ss2), std::runtime_error);
}
