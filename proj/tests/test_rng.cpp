#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "hallucigrid/rng.hpp"

using hg::Rng;

TEST_CASE("identical seeds replay identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds and child streams diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);

  Rng base(7);
  Rng c1 = base.child("alpha");
  Rng c2 = base.child("beta");
  REQUIRE(c1.next_u64() != c2.next_u64());
}

TEST_CASE("uniform01 stays in [0,1)") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double v = r.uniform01();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("below respects its bound and covers the range") {
  Rng r(5);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const uint64_t v = r.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  REQUIRE(seen.size() == 7);
}

TEST_CASE("uniform_int is inclusive on both ends") {
  Rng r(9);
  bool lo = false, hi = false;
  for (int i = 0; i < 2000; ++i) {
    const int64_t v = r.uniform_int(-2, 2);
    REQUIRE(v >= -2);
    REQUIRE(v <= 2);
    lo |= v == -2;
    hi |= v == 2;
  }
  REQUIRE(lo);
  REQUIRE(hi);
}

TEST_CASE("bernoulli tracks its probability") {
  Rng r(11);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.3);
  const double rate = static_cast<double>(hits) / n;
  REQUIRE(rate > 0.28);
  REQUIRE(rate < 0.32);
}

TEST_CASE("shuffle permutes and sample_indices draws distinct values") {
  Rng r(13);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto orig = v;
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == orig);

  const auto idx = r.sample_indices(100, 20);
  REQUIRE(idx.size() == 20);
  std::set<uint32_t> uniq(idx.begin(), idx.end());
  REQUIRE(uniq.size() == 20);
  for (uint32_t i : idx) REQUIRE(i < 100);
}

TEST_CASE("derive_seed is stable and tag-sensitive") {
  REQUIRE(Rng::derive_seed(1, "a") == Rng::derive_seed(1, "a"));
  REQUIRE(Rng::derive_seed(1, "a") != Rng::derive_seed(1, "b"));
  REQUIRE(Rng::derive_seed(1, "a", 0) != Rng::derive_seed(1, "a", 1));
}
