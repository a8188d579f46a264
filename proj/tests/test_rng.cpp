#include <doctest.h>

#include <cmath>
#include <set>

#include "shmm/rng.hpp"

using shmm::SplitMix64;

TEST_SUITE("rng") {

TEST_CASE("splitmix64 reference sequence") {
  // Reference outputs of the fixed-increment SplitMix64 for seed 0
  // (computed from the published mixing constants).
  SplitMix64 rng(0);
  CHECK(rng.next() == UINT64_C(0xE220A8397B1DCDAF));
  CHECK(rng.next() == UINT64_C(0x6E789E6AA1B965F4));
  CHECK(rng.next() == UINT64_C(0x06C45D188009454F));
}

TEST_CASE("uniform lies in [0,1) and is deterministic") {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("split streams differ from each other and the parent") {
  std::set<std::uint64_t> seeds;
  for (int r = 0; r < 100; ++r) seeds.insert(shmm::split_seed(7, r));
  CHECK(seeds.size() == 100);
}

TEST_CASE("normal and exponential moments") {
  SplitMix64 rng(123);
  const int n = 200000;
  double nsum = 0.0, nsq = 0.0, esum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    nsum += z;
    nsq += z * z;
    esum += rng.exponential(2.0);
  }
  CHECK(std::abs(nsum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(nsq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(esum / n - 0.5) < 4.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("categorical respects the distribution") {
  SplitMix64 rng(9);
  const double probs[3] = {0.2, 0.5, 0.3};
  int counts[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs, 3)];
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    CHECK(std::abs(counts[k] / double(n) - probs[k]) < 4 * se);
  }
}

}  // TEST_SUITE
