#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emes/projection.hpp"
#include "emes/rng.hpp"
#include "oracles.hpp"

using namespace emes;

TEST_CASE("feasible points are fixed points") {
  Vector x(3), caps(3);
  x << 10.0, 20.0, 30.0;
  caps << 50.0, 50.0, 50.0;
  const Vector y = project_box_budget(x, caps, 100.0);
  CHECK((y - x).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("pure box clamp when the budget is slack") {
  Vector x(3), caps(3);
  caps << 10.0, 20.0, 30.0;
  x = caps.array() + 5.0;
  const Vector y = project_box_budget(x, caps, 100.0);
  CHECK((y - caps).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("symmetric split on a binding budget") {
  Vector x(2), caps(2);
  x << 10.0, 10.0;
  caps << 10.0, 10.0;
  const Vector y = project_box_budget(x, caps, 10.0);
  CHECK(y[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(5.0).epsilon(1e-12));
  const Vector qp = testing::qp_project_box_budget(x, caps, 10.0);
  CHECK((y - qp).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("agrees with the enumerated QP solution on random instances") {
  SplitMix64 rng(21);
  for (int k = 0; k < 300; ++k) {
    const int n = rng.uniform_int(1, 4);
    Vector x(n), caps(n);
    for (int i = 0; i < n; ++i) {
      caps[i] = rng.uniform(1.0, 100.0);
      x[i] = rng.uniform(-50.0, 150.0);
    }
    const double budget = rng.uniform(10.0, 150.0);
    const Vector y = project_box_budget(x, caps, budget);
    const Vector qp = testing::qp_project_box_budget(x, caps, budget);
    REQUIRE(qp.size() == n);
    CHECK((y - qp).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK(y.sum() <= budget + 1e-9 * budget);
    for (int i = 0; i < n; ++i) {
      CHECK(y[i] >= 0.0);
      CHECK(y[i] <= caps[i]);
    }
  }
}

TEST_CASE("projection satisfies the variational characterization") {
  SplitMix64 rng(22);
  for (int k = 0; k < 100; ++k) {
    const int n = rng.uniform_int(2, 8);
    Vector x(n), caps(n);
    for (int i = 0; i < n; ++i) {
      caps[i] = rng.uniform(10.0, 240.0);
      x[i] = rng.uniform(-100.0, 400.0);
    }
    const double budget = rng.uniform(50.0, 600.0);
    const Vector y = project_box_budget(x, caps, budget);
    for (int probe = 0; probe < 30; ++probe) {
      Vector w(n);
      for (int i = 0; i < n; ++i) w[i] = rng.uniform(0.0, caps[i]);
      if (w.sum() > budget) w *= budget / w.sum();
      CHECK((x - y).dot(w - y) <= 1e-6 * (1.0 + x.norm() * w.norm()));
    }
  }
}

TEST_CASE("price projection keeps the budget identity and the box") {
  SplitMix64 rng(23);
  for (int k = 0; k < 300; ++k) {
    const int n = rng.uniform_int(1, 4);
    const double lo = rng.uniform(0.0, 10.0);
    const double hi = lo + rng.uniform(5.0, 100.0);
    const double budget = rng.uniform(n * lo, n * hi);
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(lo - 50.0, hi + 50.0);
    const Vector y = project_price_simplex(x, budget, lo, hi);
    CHECK(std::abs(y.sum() - budget) <= 1e-9 * std::max(1.0, budget));
    for (int i = 0; i < n; ++i) {
      CHECK(y[i] >= lo - 1e-12);
      CHECK(y[i] <= hi + 1e-12);
    }
    const Vector qp = testing::qp_project_price(x, budget, lo, hi);
    REQUIRE(qp.size() == n);
    CHECK((y - qp).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("price projection rejects infeasible budgets") {
  Vector x = uniform_vector(3, 1.0);
  CHECK_THROWS_AS(project_price_simplex(x, 100.0, 0.0, 10.0), ConfigError);
}

TEST_CASE("half-space projection: inactive constraint returns the plain projection") {
  Vector x(2), caps(2), w(2);
  x << 5.0, 5.0;
  caps << 10.0, 10.0;
  w << 1.0, 0.0;
  const Vector y = project_box_budget_halfspace(x, caps, 20.0, w, 100.0);
  CHECK((y - x).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("half-space projection is optimal against random feasible probes") {
  SplitMix64 rng(24);
  for (int k = 0; k < 100; ++k) {
    const int n = rng.uniform_int(2, 6);
    Vector x(n), caps(n), w(n);
    for (int i = 0; i < n; ++i) {
      caps[i] = rng.uniform(10.0, 100.0);
      x[i] = rng.uniform(0.0, caps[i]);
      w[i] = rng.normal();
    }
    const double budget = rng.uniform(20.0, 300.0);
    // Anchor the hyperplane at a feasible point, as the solver does, so the
    // intersection is never empty.
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.uniform(0.0, caps[i]);
    if (z.sum() > budget) z *= budget / z.sum();
    const double offset = w.dot(z);
    const Vector y = project_box_budget_halfspace(x, caps, budget, w, offset);

    CHECK(w.dot(y) <= offset + 1e-6 * (1.0 + std::abs(offset)));
    CHECK(y.sum() <= budget + 1e-9 * budget);
    for (int i = 0; i < n; ++i) {
      CHECK(y[i] >= -1e-12);
      CHECK(y[i] <= caps[i] + 1e-12);
    }
    // No feasible probe may be closer to x.
    const double d_y = (y - x).norm();
    for (int probe = 0; probe < 60; ++probe) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = rng.uniform(0.0, caps[i]);
      if (v.sum() > budget) v *= budget / v.sum();
      if (w.dot(v) > offset) continue;
      CHECK((v - x).norm() >= d_y - 1e-6 * (1.0 + d_y));
    }
  }
}
