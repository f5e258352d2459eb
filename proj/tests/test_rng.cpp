#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "conglab/errors.hpp"
#include "conglab/numeric.hpp"
#include "conglab/rng.hpp"

using namespace conglab;

TEST_CASE("streams are deterministic and order-independent", "[rng]") {
  RngStream a = derive_stream(42, 3);
  RngStream b = derive_stream(42, 3);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RngStream c = derive_stream(42, 4);
  RngStream d = derive_stream(42, 3);
  bool all_equal = true;
  for (int i = 0; i < 16; ++i) all_equal = all_equal && (c.next_u64() == d.next_u64());
  REQUIRE_FALSE(all_equal);

  REQUIRE(derive_seed(42, 3) != derive_seed(42, 4));
  REQUIRE(derive_seed(42, 3) != derive_seed(43, 3));
}

TEST_CASE("uniform draws live in [0,1) with the right mean", "[rng]") {
  RngStream r(123);
  const int n = 200000;
  KahanSum sum;
  for (int i = 0; i < n; ++i) {
    double u = r.next_uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum.add(u);
  }
  // 3 sigma band for the mean of n uniforms: 3 / sqrt(12 n).
  REQUIRE(std::abs(sum.value() / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("exponential draws have the requested rate", "[rng]") {
  RngStream r(7);
  const int n = 200000;
  const double rate = 2.0;
  KahanSum sum;
  for (int i = 0; i < n; ++i) {
    double x = r.next_exponential(rate);
    REQUIRE(x >= 0.0);
    sum.add(x);
  }
  double mean = sum.value() / n;
  REQUIRE(std::abs(mean - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("bounded draws and shuffles preserve their domain", "[rng]") {
  RngStream r(99);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 50000; ++i) {
    auto v = r.next_below(10);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) {
    REQUIRE(c > 4000);
    REQUIRE(c < 6000);
  }

  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> shuffled = v;
  r.shuffle(shuffled);
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == v);
}

TEST_CASE("compensated summation survives catastrophic cancellation", "[numeric]") {
  KahanSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  REQUIRE(s.value() == 1.0);
}

TEST_CASE("normal quantile matches reference values", "[numeric]") {
  REQUIRE(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-12);
  REQUIRE(std::abs(normal_quantile(0.995) - 2.5758293035489004) < 1e-12);
  REQUIRE(std::abs(normal_quantile(0.5)) < 1e-15);
  REQUIRE(std::abs(normal_quantile(0.025) + normal_quantile(0.975)) < 1e-12);
  REQUIRE_THROWS_AS(normal_quantile(0.0), InvalidAlpha);
  REQUIRE_THROWS_AS(normal_quantile(1.0), InvalidAlpha);
}
