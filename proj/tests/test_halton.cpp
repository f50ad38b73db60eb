#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "anisoqmc/halton.hpp"

using namespace anisoqmc;

TEST_CASE("radical inverse of small indices") {
  CHECK(radical_inverse(1, 2) == 0.5);
  CHECK(radical_inverse(2, 2) == 0.25);
  CHECK(radical_inverse(3, 2) == 0.75);
  CHECK(radical_inverse(4, 2) == 0.125);
  // 5 = 12 in base 3, reversed digits: 2/3 + 1/9 = 7/9
  CHECK(radical_inverse(5, 3) == Catch::Approx(7.0 / 9.0).epsilon(1e-15));
  CHECK(radical_inverse(0, 5) == 0.0);
}

TEST_CASE("point coordinates use consecutive prime bases") {
  auto p = halton_point(1, 3);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(p[2] == Catch::Approx(1.0 / 5.0).epsilon(1e-15));

  auto q = halton_point(2, 2);
  CHECK(q[0] == 0.25);
  CHECK(q[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("rule points live in [-1,1] and start at index one") {
  QuadratureRule rule = build_rule(4, 3);
  REQUIRE(rule.size == 4);
  REQUIRE(rule.dim == 3);
  CHECK(rule.weight() == 0.25);

  // first point maps (1/2, 1/3, 1/5) through x -> 2x-1
  auto p0 = rule.point(0);
  CHECK(p0[0] == 0.0);
  CHECK(p0[1] == Catch::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(p0[2] == Catch::Approx(-3.0 / 5.0).epsilon(1e-15));

  auto p1 = rule.point(1);
  CHECK(p1[0] == -0.5);
  CHECK(p1[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));

  for (long i = 0; i < rule.size; ++i)
    for (int d = 0; d < rule.dim; ++d) {
      CHECK(rule.point(i)[d] >= -1.0);
      CHECK(rule.point(i)[d] <= 1.0);
    }
}

TEST_CASE("rules of increasing size are nested") {
  QuadratureRule small = build_rule(10, 7);
  QuadratureRule big = build_rule(24, 7);
  REQUIRE(std::memcmp(small.points.data(), big.points.data(),
                      sizeof(double) * small.points.size()) == 0);
}

TEST_CASE("sample counts follow the growth schedule") {
  const long expected[] = {10, 24, 57, 135, 320, 762};
  for (int l = 0; l < 6; ++l)
    CHECK(sample_count(l, 0.2, 10, SampleSchedule::plain) == expected[l]);
}

TEST_CASE("integer-valued count expressions do not get rounded up") {
  // 2^{l(1-delta)^{-1}} with delta = 1/2 doubles exactly every half level
  CHECK(sample_count(0, 0.5, 16, SampleSchedule::plain) == 16);
  CHECK(sample_count(1, 0.5, 16, SampleSchedule::plain) == 64);
  CHECK(sample_count(2, 0.5, 16, SampleSchedule::plain) == 256);
}

TEST_CASE("log-boosted schedule dominates the plain one") {
  for (int l = 0; l <= 6; ++l) {
    const long plain = sample_count(l, 0.2, 10, SampleSchedule::plain);
    const long boosted = sample_count(l, 0.2, 10, SampleSchedule::log_boosted);
    CHECK(boosted >= plain);
  }
  // boost factor is max(l,1)^{(1+eps)/(1-delta)}, so levels 0 and 1 agree
  CHECK(sample_count(0, 0.2, 10, SampleSchedule::log_boosted) ==
        sample_count(0, 0.2, 10, SampleSchedule::plain));
  CHECK(sample_count(1, 0.2, 10, SampleSchedule::log_boosted) ==
        sample_count(1, 0.2, 10, SampleSchedule::plain));
  CHECK(sample_count(2, 0.2, 10, SampleSchedule::log_boosted) >
        sample_count(2, 0.2, 10, SampleSchedule::plain));
}

TEST_CASE("empirical mean of the first coordinate is near zero") {
  QuadratureRule rule = build_rule(1000, 1);
  double mean = 0.0;
  for (long i = 0; i < rule.size; ++i) mean += rule.weight() * rule.point(i)[0];
  CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("dimension guard") {
  CHECK_THROWS(build_rule(4, kMaxHaltonDim + 1));
  CHECK_THROWS(build_rule(0, 3));
}
