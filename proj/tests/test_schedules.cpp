#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prism/schedules.hpp"

using namespace prism;

TEST_CASE("lambda curriculum hits its anchors exactly") {
  LambdaAnchors a;
  REQUIRE(lambda_schedule(0.0, a) == 0.01);
  REQUIRE(lambda_schedule(0.5, a) == 0.1);
  REQUIRE(lambda_schedule(1.0, a) == 0.06);
  REQUIRE(lambda_schedule(0.25, a) == Catch::Approx(0.055).margin(1e-12));
  REQUIRE(lambda_schedule(0.75, a) == Catch::Approx(0.08).margin(1e-12));
}

TEST_CASE("lambda curriculum is piecewise monotone") {
  LambdaAnchors a;
  double prev = lambda_schedule(0.0, a);
  for (int i = 1; i <= 50; ++i) {
    double cur = lambda_schedule(i / 100.0, a);
    REQUIRE(cur >= prev);
    prev = cur;
  }
  for (int i = 51; i <= 100; ++i) {
    double cur = lambda_schedule(i / 100.0, a);
    REQUIRE(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("lambda schedule validates its inputs") {
  LambdaAnchors a;
  REQUIRE_THROWS_AS(lambda_schedule(-0.01, a), ConfigError);
  REQUIRE_THROWS_AS(lambda_schedule(1.01, a), ConfigError);
  LambdaAnchors bad;
  bad.mid = -0.1;
  REQUIRE_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("learning rate warms up linearly then decays to zero") {
  const std::size_t total = 1000;
  const double base = 0.01;
  const std::size_t w = warmup_steps(total, 0.03);  // ceil(30) = 30
  REQUIRE(w == 30);
  REQUIRE(lr_schedule(0, total, base) == 0.0);
  REQUIRE(lr_schedule(w, total, base) == base);
  REQUIRE(lr_schedule(w / 2, total, base) ==
          Catch::Approx(base * 0.5).margin(1e-15));
  // cosine tail ends at exactly zero
  REQUIRE(lr_schedule(total, total, base) == 0.0);
  // halfway through the decay sits at half the base rate
  std::size_t mid = w + (total - w) / 2;
  REQUIRE(lr_schedule(mid, total, base) ==
          Catch::Approx(base * 0.5).margin(1e-6));
}

TEST_CASE("learning rate decay is monotone after warmup") {
  const std::size_t total = 400;
  const double base = 0.1;
  std::size_t w = warmup_steps(total, 0.03);
  double prev = lr_schedule(w, total, base);
  for (std::size_t s = w + 1; s <= total; ++s) {
    double cur = lr_schedule(s, total, base);
    REQUIRE(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("learning rate handles edge fractions") {
  // zero warmup starts at the top of the cosine
  REQUIRE(lr_schedule(0, 100, 0.5, 0.0) == 0.5);
  REQUIRE(lr_schedule(100, 100, 0.5, 0.0) == 0.0);
  // warmup rounding: ceil(0.03 * 10) = 1
  REQUIRE(warmup_steps(10, 0.03) == 1);
  REQUIRE(warmup_steps(10, 0.0) == 0);
}

TEST_CASE("learning rate schedule validates its inputs") {
  REQUIRE_THROWS_AS(lr_schedule(0, 0, 0.1), ConfigError);
  REQUIRE_THROWS_AS(lr_schedule(5, 4, 0.1), ConfigError);
  REQUIRE_THROWS_AS(lr_schedule(0, 10, 0.0), ConfigError);
  REQUIRE_THROWS_AS(lr_schedule(0, 10, 0.1, 1.0), ConfigError);
  REQUIRE_THROWS_AS(lr_schedule(0, 10, 0.1, -0.5), ConfigError);
}
