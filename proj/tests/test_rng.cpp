#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedbuff/rng.hpp"

using namespace fedbuff;

TEST_SUITE("rng") {

TEST_CASE("identical seeds produce identical streams") {
  RngStream a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are disjoint across keys") {
  RngStream a = derive_stream(7, StreamTag::kBatch, {1, 0});
  RngStream b = derive_stream(7, StreamTag::kBatch, {1, 1});
  RngStream c = derive_stream(7, StreamTag::kDelayUp, {1, 0});
  int collisions = 0;
  for (int i = 0; i < 64; ++i) {
    const uint64_t x = a.next_u64();
    if (x == b.next_u64()) ++collisions;
    if (x == c.next_u64()) ++collisions;
  }
  CHECK(collisions == 0);
}

TEST_CASE("uniform_u64 stays in range and covers all values") {
  RngStream rng(99);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const uint64_t x = rng.uniform_u64(7);
    REQUIRE(x < 7);
    ++counts[static_cast<size_t>(x)];
  }
  for (int c : counts) CHECK(c > 9000);  // expected 10000 each
}

TEST_CASE("next_double lies in [0,1)") {
  RngStream rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.next_double();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("normal has approximately unit moments") {
  RngStream rng(2024);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("geometric respects the cap and mean") {
  RngStream rng(77);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int64_t x = rng.geometric(0.5, 10);
    REQUIRE(x >= 0);
    REQUIRE(x <= 10);
    sum += static_cast<double>(x);
  }
  // mean of Geometric(0.5) is 1; the cap at 10 shaves off ~2^-10
  CHECK(sum / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rng.geometric(1.0, 10) == 0);
}

}  // TEST_SUITE
