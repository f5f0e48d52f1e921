#include "nucspde/space.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <random>

using namespace nucspde;
using namespace nucspde::testing;

TEST_CASE("pairing") {
  CHECK(pairing(dual({1, 2, 0}), test_fn({0, 1, 0})) == 2.0);
  CHECK(pairing(DualVector::zero(3), test_fn({0.3, -7, 2})) == 0.0);
  CHECK(pairing(dual({1, 1, 1, 1}), test_fn({1, -1, 1, -1})) == 0.0);
  CHECK_THROWS_AS(pairing(dual({1, 2}), test_fn({1, 2, 3})), DimensionError);
}

TEST_CASE("pairing is bilinear") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    Vector f(5), g(5), p(5);
    for (int j = 0; j < 5; ++j) {
      f(j) = n(gen);
      g(j) = n(gen);
      p(j) = n(gen);
    }
    const double a = n(gen);
    CHECK(pairing(DualVector(a * f + g), TestFunction(p)) ==
          doctest::Approx(a * pairing(DualVector(f), TestFunction(p)) + pairing(DualVector(g), TestFunction(p))).epsilon(1e-12));
  }
}

TEST_CASE("seminorms") {
  const SeminormFamily fam(4);
  CHECK(seminorm(fam, 1, TestFunction::basis(4, 0)) == 1.0);
  CHECK(seminorm(fam, 1, TestFunction::basis(4, 1)) == 2.0);
  const TestFunction phi = test_fn({3, 4, 0, 0});
  CHECK(seminorm(fam, 0, phi) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(dual_seminorm(fam, 1, DualVector::basis(4, 1)) == 0.5);
  CHECK(dual_seminorm(fam, 0, dual({3, 0, 4, 0})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(fam.weight(2, 2) == 81.0);
}

TEST_CASE("dual seminorm bounds the pairing") {
  const SeminormFamily fam(6);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n;
  for (int i = 0; i < 1000; ++i) {
    Vector f(6), p(6);
    for (int j = 0; j < 6; ++j) {
      f(j) = n(gen);
      p(j) = n(gen);
    }
    const unsigned level = static_cast<unsigned>(i % 3);
    CHECK(std::abs(pairing(DualVector(f), TestFunction(p))) <=
          dual_seminorm(fam, level, DualVector(f)) * seminorm(fam, level, TestFunction(p)) * (1 + 1e-14));
  }
}

TEST_CASE("seminorms increase with the level") {
  const SeminormFamily fam(5);
  const TestFunction phi = test_fn({0.3, -1, 2, 0.1, -0.5});
  for (unsigned n = 0; n < 4; ++n) CHECK(seminorm(fam, n, phi) <= seminorm(fam, n + 1, phi));
  CHECK_NOTHROW(fam.check_monotone(6));
  const SeminormFamily bad(3, [](unsigned n, std::size_t) { return 1.0 / (1.0 + n); });
  CHECK_THROWS_AS(bad.check_monotone(2), DomainError);
}

TEST_CASE("Hilbert-Schmidt embedding norm") {
  CHECK(hs_embedding_norm(SeminormFamily(4), 0) == doctest::Approx(1.1931517).epsilon(1e-7));
  CHECK(hs_embedding_norm(SeminormFamily(4), 3) == doctest::Approx(1.1931517).epsilon(1e-7));
  CHECK(hs_embedding_norm(SeminormFamily(1), 2) == 1.0);
  for (std::size_t d = 1; d < 10; ++d)
    CHECK(hs_embedding_norm(SeminormFamily(d), 1) <= hs_embedding_norm(SeminormFamily(d + 1), 1));
}

TEST_CASE("orthonormal basis has unit seminorm") {
  const SeminormFamily fam(6);
  for (unsigned n = 0; n < 3; ++n)
    for (std::size_t j = 0; j < 6; ++j) CHECK(seminorm(fam, n, fam.orthonormal_basis(n, j)) == doctest::Approx(1.0));
}

TEST_CASE("jump seminorms") {
  Matrix q(2, 2);
  q << 2, 1, 1, 2;
  const JumpSeminormFamily jf(q);
  const TestFunction phi = test_fn({1, -1});
  CHECK(jf.value(nullptr, phi) == doctest::Approx(std::sqrt(2.0)));
  const DualVector u = dual({3, 1});
  CHECK(jf.value(&u, phi) == 2.0);
  CHECK(jf.bilinear(&u, phi, test_fn({0, 1})) == 2.0);
}

TEST_CASE("covariance validation") {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(psd_sqrt(asym, "q"), DomainError);
  Matrix neg(2, 2);
  neg << 1, 2, 2, 1;
  CHECK_THROWS_AS(psd_sqrt(neg, "q"), DomainError);
  Matrix ok(2, 2);
  ok << 4, 0, 0, 0;
  const Matrix r = psd_sqrt(ok, "q");
  CHECK((r * r.transpose() - ok).norm() < 1e-14);
}

TEST_CASE("coordinates reject non-finite values") {
  Vector v(2);
  v << 1, std::nan("");
  CHECK_THROWS_AS(DualVector{v}, DomainError);
  CHECK_THROWS_AS(DualVector::basis(3, 3), DimensionError);
}
