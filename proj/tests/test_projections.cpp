#include <doctest.h>

#include <random>

#include "copeval/errors.hpp"
#include "copeval/projections.hpp"
#include "test_util.hpp"

using namespace copeval;
using testutil::sup_diff;

namespace {

struct Case {
  Vector v, w;
};

Case random_case(std::mt19937_64& gen, Index n) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::normal_distribution<double> g(0.0, 1.5);
  Case c{Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    c.v(i) = g(gen);
    c.w(i) = u(gen);
  }
  return c;
}

// Exhaustive search over a grid of the 3-dimensional weighted simplex.
double brute_force_distance(const Vector& v, const Vector& w, double step, Vector* best) {
  double best_d = 1e300;
  for (double a = 0.0; a * w(0) <= 1.0; a += step) {
    for (double b = 0.0; a * w(0) + b * w(1) <= 1.0; b += step) {
      const double c = (1.0 - a * w(0) - b * w(1)) / w(2);
      const double d = (a - v(0)) * (a - v(0)) + (b - v(1)) * (b - v(1)) + (c - v(2)) * (c - v(2));
      if (d < best_d) {
        best_d = d;
        if (best) *best = Vector{{a, b, c}};
      }
    }
  }
  return best_d;
}

}  // namespace

TEST_CASE("weighted simplex projection examples") {
  const Vector w = Vector::Ones(3);
  const Vector feasible{{0.2, 0.3, 0.5}};
  CHECK(sup_diff(project_weighted_simplex(feasible, w), feasible) < 1e-15);

  const Vector v{{2.0, 0.0, 0.0}};
  const Vector u = project_weighted_simplex(v, w);
  CHECK(sup_diff(u, Vector{{1.0, 0.0, 0.0}}) < 1e-15);
  Vector grid_best;
  brute_force_distance(v, w, 1e-4, &grid_best);
  CHECK(sup_diff(u, grid_best) <= 1e-4);
}

TEST_CASE("projection output is feasible") {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 1000; ++i) {
    const Case c = random_case(gen, 1 + i % 12);
    const Vector u = project_weighted_simplex(c.v, c.w);
    CHECK(u.minCoeff() >= 0.0);
    CHECK(std::abs(c.w.dot(u) - 1.0) <= 1e-10);
    CHECK(WeightedSimplex(c.w).contains(u));
  }
}

TEST_CASE("projection is optimal against a grid") {
  std::mt19937_64 gen(2);
  for (int i = 0; i < 20; ++i) {
    const Case c = random_case(gen, 3);
    const Vector u = project_weighted_simplex(c.v, c.w);
    const double d = (u - c.v).squaredNorm();
    CHECK(d <= brute_force_distance(c.v, c.w, 2e-3, nullptr) + 1e-12);
  }
}

TEST_CASE("projection satisfies the KKT conditions") {
  // u = max(v - tau w, 0) for one tau.
  std::mt19937_64 gen(3);
  for (int i = 0; i < 200; ++i) {
    const Case c = random_case(gen, 8);
    const Vector u = project_weighted_simplex(c.v, c.w);
    double tau = 0.0;
    Index active = -1;
    for (Index k = 0; k < 8; ++k) {
      if (u(k) > 0.0) {
        tau = (c.v(k) - u(k)) / c.w(k);
        active = k;
      }
    }
    REQUIRE(active >= 0);
    for (Index k = 0; k < 8; ++k) {
      CHECK(std::abs(u(k) - std::max(c.v(k) - tau * c.w(k), 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("projection is nonexpansive and idempotent") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Case c = random_case(gen, 6);
    Vector v2 = c.v;
    for (Index k = 0; k < 6; ++k) v2(k) += g(gen);
    const Vector p1 = project_weighted_simplex(c.v, c.w);
    const Vector p2 = project_weighted_simplex(v2, c.w);
    CHECK((p1 - p2).norm() <= (c.v - v2).norm() + 1e-12);
    CHECK(sup_diff(project_weighted_simplex(p1, c.w), p1) < 1e-12);
  }
}

TEST_CASE("affine slice projection") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    const Case c = random_case(gen, 5);
    const Vector a = project_affine_slice(c.v, c.w);
    CHECK(std::abs(c.w.dot(a) - 1.0) <= 1e-12);
    CHECK(sup_diff(project_affine_slice(a, c.w), a) < 1e-12);

    // Interior case: start from a strictly positive feasible point plus a small
    // move along the slice; both projections must agree.
    Vector inside(5);
    for (Index k = 0; k < 5; ++k) inside(k) = u(gen);
    inside /= c.w.dot(inside);
    const Vector perturbed = inside + 1e-3 * c.w;
    CHECK(sup_diff(project_weighted_simplex(perturbed, c.w), project_affine_slice(perturbed, c.w)) < 1e-12);
  }
}

TEST_CASE("threshold ties are set to zero") {
  // v - tau w hits zero exactly in the last coordinate.
  const Vector w = Vector::Ones(3);
  const Vector v{{1.0, 0.5, 0.0}};
  const Vector u = project_weighted_simplex(v, w);
  CHECK(u(2) == 0.0);
  CHECK(sup_diff(u, Vector{{0.75, 0.25, 0.0}}) < 1e-15);
}

TEST_CASE("active-coordinate projection leaves unweighted coordinates alone") {
  Vector v{{0.7, 5.0, 0.9, -3.0}};
  const Vector w{{0.5, 0.0, 0.5, 0.0}};
  REQUIRE(project_weighted_simplex_active(v, w));
  CHECK(v(1) == 5.0);
  CHECK(v(3) == -3.0);
  CHECK(std::abs(0.5 * v(0) + 0.5 * v(2) - 1.0) < 1e-12);
  Vector z{{1.0, 2.0}};
  CHECK_FALSE(project_weighted_simplex_active(z, Vector::Zero(2)));
}

TEST_CASE("nonpositive weights are rejected") {
  CHECK_THROWS_AS(project_weighted_simplex(Vector::Ones(2), Vector{{1.0, 0.0}}), InvalidArgument);
  CHECK_THROWS_AS(WeightedSimplex(Vector{{1.0, -1.0}}), InvalidArgument);
  CHECK_THROWS_AS(project_weighted_simplex(Vector::Ones(3), Vector::Ones(2)), InvalidArgument);
}
