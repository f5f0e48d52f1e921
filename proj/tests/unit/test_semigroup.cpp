#include "nucspde/semigroup.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <random>

using namespace nucspde;
using namespace nucspde::testing;

TEST_CASE("semigroup action") {
  const DiagonalSemigroup S(dual({1, 2}).coeffs());
  const TestFunction psi = test_fn({1, 1});
  CHECK(apply(S, 0.0, psi) == psi);
  const TestFunction h = apply(S, std::log(2.0), psi);
  CHECK(h[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(apply(S, -0.1, psi), DomainError);
}

TEST_CASE("semigroup law") {
  const DiagonalSemigroup S = DiagonalSemigroup::from_tag("quadratic", 5);
  const TestFunction psi = test_fn({1, -2, 0.5, 3, 1});
  for (double s : {0.0, 0.1, 0.7})
    for (double t : {0.0, 0.25, 1.3}) {
      const Vector lhs = apply(S, t, apply(S, s, psi)).coeffs();
      const Vector rhs = apply(S, t + s, psi).coeffs();
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("dual action is the transpose") {
  const DiagonalSemigroup S = DiagonalSemigroup::from_tag("linear", 4);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    Vector g(4), p(4);
    for (int j = 0; j < 4; ++j) {
      g(j) = n(gen);
      p(j) = n(gen);
    }
    const double t = u(gen);
    CHECK(std::abs(pairing(apply_dual(S, t, DualVector(g)), TestFunction(p)) -
                   pairing(DualVector(g), apply(S, t, TestFunction(p)))) < 1e-12);
  }
  const DiagonalSemigroup S2(dual({1, 2}).coeffs());
  CHECK(apply_dual(S2, 1.0, DualVector::basis(2, 1))[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(apply_dual(S2, 0.0, dual({3, 4})) == dual({3, 4}));
}

TEST_CASE("generator") {
  const DiagonalSemigroup S = DiagonalSemigroup::from_tag("linear", 3);
  CHECK(generator_apply(S, TestFunction::basis(3, 0)) == test_fn({-1, 0, 0}));
  const TestFunction psi = test_fn({1, 0.5, -2});
  const TestFunction phi = test_fn({0, 3, 1});
  CHECK(generator_apply(S, 2.0 * psi + phi) == 2.0 * generator_apply(S, psi) + generator_apply(S, phi));
  // forward difference error is O(h)
  const Vector a = generator_apply(S, psi).coeffs();
  double err[2];
  int i = 0;
  for (double h : {1e-3, 1e-4}) err[i++] = ((apply(S, h, psi).coeffs() - psi.coeffs()) / h - a).norm();
  CHECK(err[0] / err[1] == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("exponential bound") {
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  const SeminormFamily fam(4);
  const SemigroupBound b = certify_bound(DiagonalSemigroup::from_tag("linear", 4), fam, 1, grid);
  CHECK(b.M == 1.0);
  CHECK(b.theta == 0.0);
  const SemigroupBound shifted = certify_bound(DiagonalSemigroup(Vector::Zero(4), 0.3), fam, 2, grid);
  CHECK(shifted.M == 1.0);
  CHECK(shifted.theta == doctest::Approx(0.3));
  CHECK_THROWS_AS(DiagonalSemigroup(dual({-1, 0}).coeffs()), DomainError);
  CHECK_THROWS_AS(DiagonalSemigroup::from_tag("cubic", 3), DomainError);
}

TEST_CASE("strong continuity under refinement") {
  const DiagonalSemigroup S = DiagonalSemigroup::from_tag("quadratic", 6);
  const SeminormFamily fam(6);
  const TestFunction psi = test_fn({1, 1, 1, 1, 1, 1});
  const double rate = seminorm(fam, 2, generator_apply(S, psi));
  double prev = 1e300;
  for (double h = 0.1; h > 1e-7; h /= 10.0) {
    const double d = seminorm(fam, 2, apply(S, h, psi) - psi);
    CHECK(d < prev);
    CHECK(d <= rate * h * (1 + 1e-12));
    prev = d;
  }
  CHECK(prev / 1e-7 == doctest::Approx(rate).epsilon(1e-4));
}
