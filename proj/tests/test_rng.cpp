// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <doctest.h>

#include "dmlink/rng.hpp"

using dmlink::RngStream;

TEST_CASE("uniform is the top-53-bit mapping of mt19937_64") {
  RngStream rng(42);
  std::mt19937_64 raw(42);
  for (int i = 0; i < 1000; ++i) {
    const double want = static_cast<double>(raw() >> 11) * 0x1.0p-53;
    const double got = rng.uniform();
    CHECK(got == want);
    CHECK(got >= 0.0);
    CHECK(got < 1.0);
  }
}

TEST_CASE("same seed gives identical sequences") {
  RngStream a(123), b(123);
  for (int i = 0; i < 200; ++i) CHECK(a.gaussian() == b.gaussian());
}

TEST_CASE("gaussian moments") {
  RngStream rng(77);
  const long n = 400000;
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
    sum3 += g * g * g;
    sum4 += g * g * g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);          // mean 0, se ~ 0.0016
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(sum3 / n) < 0.03);         // skewness 0
  CHECK(sum4 / n == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("cgaussian splits variance between parts") {
  RngStream rng(78);
  const long n = 200000;
  const double var = 2.5;
  double re2 = 0.0, im2 = 0.0, cross = 0.0;
  for (long i = 0; i < n; ++i) {
    const auto z = rng.cgaussian(var);
    re2 += z.real() * z.real();
    im2 += z.imag() * z.imag();
    cross += z.real() * z.imag();
  }
  CHECK(re2 / n == doctest::Approx(var / 2).epsilon(0.02));
  CHECK(im2 / n == doctest::Approx(var / 2).epsilon(0.02));
  CHECK(std::abs(cross / n) < 0.02);
}

TEST_CASE("fill_gaussian equals repeated gaussian() scaled") {
  RngStream a(5), b(5);
  std::vector<double> buf(37);
  a.fill_gaussian(buf, 0.25);
  for (double v : buf) CHECK(v == 0.25 * b.gaussian());
}

TEST_CASE("uniform_index stays in range and covers values") {
  RngStream rng(6);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_index(7);
    REQUIRE(v < 7);
    ++counts[static_cast<int>(v)];
  }
  for (int c : counts) CHECK(c > 800);  // ~1000 expected each
}

TEST_CASE("derived streams differ across tags and indices") {
  RngStream a = dmlink::derive_stream(1, "alpha", 0);
  RngStream b = dmlink::derive_stream(1, "alpha", 1);
  RngStream c = dmlink::derive_stream(1, "beta", 0);
  RngStream d = dmlink::derive_stream(2, "alpha", 0);
  const auto a0 = a.next_u64();
  CHECK(a0 != b.next_u64());
  CHECK(a0 != c.next_u64());
  CHECK(a0 != d.next_u64());

  RngStream a2 = dmlink::derive_stream(1, "alpha", 0);
  CHECK(a2.next_u64() == a0);
}

TEST_CASE("golden values pin the sequence across platforms") {
  // If these move, every seeded experiment output changes with them.
  RngStream rng(20240901);
  CHECK(rng.next_u64() == UINT64_C(9231963227193688086));
  CHECK(rng.uniform() == doctest::Approx(0.21714018541816815).epsilon(1e-15));
  CHECK(rng.gaussian() == doctest::Approx(-0.70541002849294998).epsilon(1e-12));
}
