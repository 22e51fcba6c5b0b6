#include "doctest.h"

#include <cmath>

#include "sense/error.hpp"
#include "sense/loss.hpp"
#include "sense/rng.hpp"

using namespace sense;

TEST_CASE("cosine_similarity examples") {
  CHECK(cosine_similarity(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(cosine_similarity(Vector{1, 2, 3}, Vector{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Vector{3, 4}, Vector{4, 3}) == doctest::Approx(0.96).epsilon(1e-15));
  CHECK(cosine_similarity(Vector{1, 1}, Vector{-1, -1}) == doctest::Approx(-1.0).epsilon(1e-15));
  // Clamped even when rounding would push past 1.
  for (double x : {0.1, 1.0 / 3.0, 7.77, 1e-3})
    CHECK(cosine_similarity(Vector{x, x, x}, Vector{x, x, x}) <= 1.0);
}

TEST_CASE("cosine_loss values") {
  CHECK(cosine_loss(Vector{1, 0}, Vector{2, 0}) == 0.0);
  CHECK(cosine_loss(Vector{1, 0}, Vector{0, 3}) == 1.0);
  CHECK(cosine_loss(Vector{1, 0}, Vector{-5, 0}) == 2.0);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(cosine_similarity(Vector{1, 0}, Vector{1, 0, 0}), ShapeError);
  CHECK_THROWS_AS(cosine_similarity(Vector{0, 0}, Vector{1, 0}), DomainError);
  CHECK_THROWS_AS(cosine_loss(Vector{1, 0}, Vector{0, 0}), DomainError);
  CHECK_THROWS_AS(loss_grad(Vector{0, 0}, Vector{1, 0}), DomainError);
  CHECK_THROWS_AS(loss_grad(Vector{1}, Vector{1, 0}), ShapeError);
}

TEST_CASE("loss_grad against central differences") {
  SplitMix64 g(5);
  for (int n = 0; n < 200; ++n) {
    const std::size_t d = 2 + g.below(7);
    Vector s(d), t(d);
    for (auto& x : s) x = g.normal();
    for (auto& x : t) x = g.normal();
    const auto gr = loss_grad(s, t);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < d; ++i) {
      Vector up = s, down = s;
      up[i] += eps;
      down[i] -= eps;
      const double numeric = (cosine_loss(up, t) - cosine_loss(down, t)) / (2 * eps);
      CHECK(std::fabs(gr[i] - numeric) < 1e-6);
    }
  }
}

TEST_CASE("loss contract properties") {
  SplitMix64 g(6);
  for (int n = 0; n < 500; ++n) {
    Vector s(8), t(8);
    for (auto& x : s) x = g.normal();
    for (auto& x : t) x = g.normal();
    const double l = cosine_loss(s, t);
    CHECK(l >= 0.0);
    CHECK(l <= 2.0);
    for (double c : {0.5, 2.0, 10.0}) {
      Vector ct = t;
      for (auto& x : ct) x *= c;
      CHECK(std::fabs(cosine_loss(s, ct) - l) < 1e-9);
    }
    CHECK(std::fabs(dot(loss_grad(s, t), s)) < 1e-9);
  }
}
