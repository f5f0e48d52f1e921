#include "nucspde/ensemble.hpp"
#include "nucspde/strong_integral.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace nucspde;
using namespace nucspde::testing;

namespace {

OperatorIntegrand constant_op(const Matrix& m) {
  return deterministic_operator(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                                [m](double, const MarkView&) { return m; });
}

OperatorIntegrand feedback_op(std::size_t d) {
  return {[d](const Instant&, const History& h, const MarkView&) {
            const auto n = static_cast<Eigen::Index>(d);
            return Matrix((1.0 + 0.5 * std::tanh(h.wiener_now()(0))) * Matrix::Identity(n, n));
          },
          MomentClass::square, d, d};
}

MvmSpec mixed_spec(std::size_t d) {
  return MvmSpec(Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
                 LevyMeasure(d, {{DualVector::basis(d, 0), 2.0}, {DualVector::basis(d, d - 1), 1.0}}));
}

}  // namespace

TEST_CASE("zero and identity integrands") {
  const MvmSpec spec = wiener_only(3);
  for (std::uint64_t id = 0; id < 10; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 1, id);
    CHECK(integrate_strong(constant_op(Matrix::Zero(3, 3)), spec, p, 1.0) == DualVector::zero(3));
    const DualVector w = integrate_strong(constant_op(Matrix::Identity(3, 3)), spec, p, 0.5);
    CHECK((w.coeffs() - p.wiener(8)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("diagonal integrand coordinates") {
  const std::size_t K = 64;
  const auto grid = uniform_grid(1.0, K);
  const MvmSpec spec = wiener_only(2);
  const OperatorIntegrand r = deterministic_operator(2, 2, [](double s, const MarkView&) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = s;
    m(1, 1) = 1.0;
    return m;
  });
  double scheme = 0.0;
  for (std::size_t k = 0; k < K; ++k) scheme += std::pow(grid->time(k), 2) * grid->dt(k);
  const auto t = run_ensemble({"x0", "x1"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const DualVector v = integrate_strong(r, spec, simulate_path(spec, grid, 3, id), 1.0);
    out[0] = v[0] * v[0];
    out[1] = v[1] * v[1];
  });
  CHECK(within_mc(t.estimate(0), 1.0 / 3.0, 1.0 / 3.0 - scheme));
  CHECK(within_mc(t.estimate(1), 1.0));
}

TEST_CASE("strong isometry for the identity") {
  const SeminormFamily fam(3);
  const MvmSpec spec = wiener_only(3);
  const auto grid = uniform_grid(1.0, 8);
  const OperatorIntegrand id = constant_op(Matrix::Identity(3, 3));
  const double target = 1.0 + 1.0 / 4.0 + 1.0 / 9.0;
  CHECK(strong_norm_quadrature([](double, const MarkView&) { return Matrix(Matrix::Identity(3, 3)); }, spec, fam, 1,
                               1.0) == doctest::Approx(target));
  const auto t = run_ensemble({"p2"}, 20000, [&](std::uint64_t i, std::span<double> out) {
    const double v = dual_seminorm(fam, 1, integrate_strong(id, spec, simulate_path(spec, grid, 4, i), 1.0));
    out[0] = v * v;
  });
  CHECK(within_mc(t.estimate(0), target));
}

TEST_CASE("Hilbert-Schmidt factorization") {
  const SeminormFamily fam(4);
  const MvmSpec spec = wiener_only(4);
  const auto grid = uniform_grid(1.0, 8);
  const HsFactorization f = factorize(constant_op(Matrix::Identity(4, 4)), spec, fam, grid, {}, 1.5, 4);
  CHECK(f.level == 1);
  CHECK(f.within_budget);
  CHECK(f.norm_squared == doctest::Approx(1.0 + 1.0 / 4.0 + 1.0 / 9.0 + 1.0 / 16.0).epsilon(1e-9));
  CHECK(f.reconstruction_error < 1e-12);
  for (std::size_t p = 1; p < f.level_norms.size(); ++p) CHECK(f.level_norms[p] <= f.level_norms[p - 1]);

  const HsFactorization z = factorize(constant_op(Matrix::Zero(4, 4)), spec, fam, grid, {}, 1e-9, 4);
  CHECK(z.level == 0);
  CHECK(z.norm_squared == 0.0);
}

TEST_CASE("rank-one Hilbert-Schmidt identity") {
  const SeminormFamily fam(3);
  Matrix q(3, 3);
  q << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 3;
  const MvmSpec spec(q, LevyMeasure(3, {{dual({1, 2, 0}), 1.5}}));
  const Vector psi0 = dual({1, -1, 2}).coeffs(), phi0 = dual({0.5, 1, -1}).coeffs();
  const Matrix r = psi0 * phi0.transpose();
  for (unsigned p = 0; p < 3; ++p) {
    const double pp = dual_seminorm(fam, p, DualVector(psi0));
    const double qq = phi0.dot(q * phi0);
    CHECK(hs_norm_squared(r, spec, MarkView::wiener_mark(), fam, p) == doctest::Approx(pp * pp * qq));
    const DualVector& u = spec.levy().atom(0).point;
    const double up = u.coeffs().dot(phi0);
    CHECK(hs_norm_squared(r, spec, MarkView{0, &u}, fam, p) == doctest::Approx(pp * pp * up * up));
    CHECK(hs_density([&](const MarkView&) { return r; }, spec, fam, p) ==
          doctest::Approx(pp * pp * (qq + 1.5 * up * up)));
  }
}

TEST_CASE("weak-strong compatibility and direct accumulation") {
  const MvmSpec spec = mixed_spec(3);
  const OperatorIntegrand r = feedback_op(3);
  for (std::uint64_t id = 0; id < 20; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 5, id);
    CHECK(weak_strong_compatibility(r, spec, p, 1.0).holds(1e-12));
    const DualVector a = integrate_strong(r, spec, p, 0.75);
    const DualVector b = integrate_strong_direct(r, spec, p, 0.75);
    CHECK((a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(a[j] == doctest::Approx(integrate(transpose_apply(r, TestFunction::basis(3, j)), spec, p, 0.75)));
  }
}

TEST_CASE("pushforward, stopping and restriction") {
  const MvmSpec spec = mixed_spec(3);
  const OperatorIntegrand r = feedback_op(3);
  Matrix s(2, 3);
  s << 1, -2, 0.5, 0, 3, 1;
  const Event pos = [](const History& h) { return h.wiener_now()(1) > 0.0; };
  const Event none = [](const History&) { return false; };
  for (std::uint64_t id = 0; id < 20; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 6, id);
    CHECK(pushforward_check(r, s, spec, p, 1.0).holds(1e-10));
    const VectorComparison zero = pushforward_check(r, Matrix::Zero(2, 3), spec, p, 1.0);
    CHECK(zero.lhs == DualVector::zero(2));
    CHECK(strong_stopped_check(r, spec, p, 1.0, 1.0).holds(1e-12));
    const double sigma = p.jumps().empty() ? 1.0 : p.grid().time(p.grid().floor_index(p.jumps().front().time));
    CHECK(strong_stopped_check(r, spec, p, sigma, 1.0).holds(1e-12));
    CHECK(strong_restriction_check(r, spec, p, 0.25, 0.75, pos, 1.0).holds(1e-12));
    const VectorComparison e = strong_restriction_check(r, spec, p, 0.25, 0.75, none, 1.0);
    CHECK(e.lhs == DualVector::zero(3));
  }
}

TEST_CASE("strong linearity") {
  const MvmSpec spec = mixed_spec(2);
  const OperatorIntegrand a = feedback_op(2);
  Matrix m(2, 2);
  m << 1, 2, -1, 0.5;
  const OperatorIntegrand b = constant_op(m);
  for (std::uint64_t id = 0; id < 10; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 9, id);
    const Vector lhs = integrate_strong(linear_combination({{3.0, a}, {-1.0, b}}), spec, p, 1.0).coeffs();
    const Vector rhs =
        3.0 * integrate_strong(a, spec, p, 1.0).coeffs() - integrate_strong(b, spec, p, 1.0).coeffs();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("shape mismatch") {
  const MvmSpec spec = wiener_only(2);
  const SeminormFamily fam(3);
  CHECK_THROWS_AS(hs_norm_squared(Matrix::Identity(2, 2), spec, MarkView::wiener_mark(), fam, 0), DimensionError);
}
