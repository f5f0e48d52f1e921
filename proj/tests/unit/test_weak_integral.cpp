#include "nucspde/ensemble.hpp"
#include "nucspde/weak_integral.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace nucspde;
using namespace nucspde::testing;

namespace {

MvmSpec mixed_spec() {
  return MvmSpec(Matrix::Identity(2, 2), LevyMeasure(2, {{dual({1, 0}), 2.0}, {dual({0.5, -1}), 1.5}}));
}

WeakIntegrand exp_local(const TestFunction& phi, const TestFunction& observe) {
  return {[phi, observe](const Instant&, const History& h, const MarkView&) {
            return std::exp(std::abs(h.wiener_pairing(h.last_index(), observe))) * phi;
          },
          MomentClass::local};
}

WeakIntegrand feedback(const TestFunction& phi, const TestFunction& observe) {
  return {[phi, observe](const Instant&, const History& h, const MarkView&) {
            return (1.0 + 0.5 * std::tanh(h.wiener_pairing(h.last_index(), observe))) * phi;
          },
          MomentClass::square};
}

}  // namespace

TEST_CASE("simple integrand examples") {
  const MvmSpec spec = mixed_spec();
  const TestFunction phi = test_fn({1, 2});
  const SimpleIntegrand x(2, {{0.0, 1.0, {}, std::nullopt, {{RingSet::everything(2), phi}}}});
  for (std::uint64_t id = 0; id < 20; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 8), 1, id);
    CHECK(integrate_simple(x, spec, p, 1.0) == mvm_evaluate(spec, p, 0.0, 1.0, RingSet::everything(2), phi));
    CHECK(integrate_simple(x, spec, p, 0.0) == 0.0);
    CHECK(integrate(x.as_weak(), spec, p, 0.0) == 0.0);
  }
}

TEST_CASE("simple integrands agree with the general scheme") {
  const MvmSpec spec = mixed_spec();
  const TestFunction obs = test_fn({1, 0});
  const Event up = [obs](const History& h) { return h.wiener_pairing(h.last_index(), obs) > 0.0; };
  const Event down = [obs](const History& h) { return !(h.wiener_pairing(h.last_index(), obs) > 0.0); };
  const SimpleIntegrand x(2, {{0.0, 0.25, {}, std::nullopt, {{RingSet::wiener(), test_fn({1, 0})}}},
                              {0.25, 0.75, up, 0.5, {{RingSet::everything(2), test_fn({0, 1})}}},
                              {0.25, 0.75, down, 0.5, {{RingSet::of_atoms(1), test_fn({2, 0})}}},
                              {0.75, 1.0, {}, std::nullopt, {{RingSet::of_atoms(2), test_fn({1, 1})}}}});
  for (std::uint64_t id = 0; id < 50; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 4, id);
    for (double t : {0.25, 0.5, 1.0})
      CHECK(std::abs(integrate(x.as_weak(), spec, p, t) - integrate_simple(x, spec, p, t)) < 1e-12);
  }
}

TEST_CASE("simple integrand structure is validated") {
  const TestFunction phi = test_fn({1, 0});
  CHECK_THROWS_AS(SimpleIntegrand(2, {{0.0, 0.5, {}, std::nullopt, {{RingSet::wiener(), phi}}},
                                      {0.25, 1.0, {}, std::nullopt, {{RingSet::wiener(), phi}}}}),
                  StructuralError);
  CHECK_THROWS_AS(SimpleIntegrand(2, {{0.5, 0.5, {}, std::nullopt, {}}}), StructuralError);
  CHECK_THROWS_AS(SimpleIntegrand(2, {{0.0, 0.5, {}, 1.5, {}}}), StructuralError);
  const SimpleIntegrand twice(2, {{0.0, 0.5, {}, std::nullopt, {{RingSet::wiener(), phi}}},
                                  {0.0, 0.5, {}, std::nullopt, {{RingSet::wiener(), phi}}}});
  const NoisePath p = simulate_path(mixed_spec(), uniform_grid(1.0, 4), 1, 0);
  CHECK_THROWS_AS(integrate_simple(twice, mixed_spec(), p, 1.0), StructuralError);
}

TEST_CASE("simple isometry norm") {
  const MvmSpec spec = mixed_spec();
  const Event quarter = [](const History& h) { return h.wiener_now()(0) > 0.0 && h.wiener_now()(1) > 0.0; };
  const SimpleIntegrand x(2, {{0.0, 0.5, {}, std::nullopt, {{RingSet::wiener(), test_fn({1, 1})}}},
                              {0.5, 1.0, quarter, 0.25, {{RingSet::of_atoms(3), test_fn({2, 0})}}}});
  // Q(1,1)^2/2 and rates 2*2^2 + 1.5*1^2 on half an interval with probability 1/4
  CHECK(x.norm_squared(spec) == doctest::Approx(1.0 + 0.25 * 0.5 * (8.0 + 1.5)));
  const auto t = run_ensemble({"i2"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const double v = integrate_simple(x, spec, simulate_path(spec, uniform_grid(1.0, 4), 12, id), 1.0);
    out[0] = v * v;
  });
  CHECK(within_mc(t.estimate(0), 2.1875));
  const SimpleIntegrand unknown(2, {{0.0, 1.0, quarter, std::nullopt, {}}});
  CHECK_THROWS_AS(unknown.norm_squared(spec), StructuralError);
}

TEST_CASE("constant integrand gives the Wiener path") {
  const MvmSpec spec = wiener_only(3);
  const TestFunction phi = test_fn({1, -2, 0.5});
  const WeakIntegrand x = deterministic_integrand([phi](double, const MarkView&) { return phi; });
  for (std::uint64_t id = 0; id < 20; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 32), 2, id);
    const WeakIntegralPath ip = integrate_path(x, spec, p);
    for (std::size_t k = 0; k <= 32; ++k) CHECK(std::abs(ip.values[k] - p.wiener(k).dot(phi.coeffs())) < 1e-12);
  }
}

TEST_CASE("isometry for a linear-in-time integrand") {
  const std::size_t K = 64;
  const auto grid = uniform_grid(1.0, K);
  const MvmSpec spec = wiener_only(1);
  const WeakIntegrand x = deterministic_integrand([](double r, const MarkView&) { return test_fn({r}); });
  double scheme = 0.0;
  for (std::size_t k = 0; k < K; ++k) scheme += std::pow(grid->time(k), 2) * grid->dt(k);
  CHECK(scheme == doctest::Approx(85344.0 / 262144.0));
  const auto t = run_ensemble({"i", "i2"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const double v = integrate(x, spec, simulate_path(spec, grid, 8, id), 1.0);
    out[0] = v;
    out[1] = v * v;
  });
  CHECK(within_mc(t.estimate(0), 0.0));
  CHECK(within_mc(t.estimate(1), scheme));
  CHECK(within_mc(t.estimate(1), 1.0 / 3.0, 1.0 / 3.0 - scheme));
}

TEST_CASE("anticipating integrands are rejected") {
  const MvmSpec spec = wiener_only(1);
  const WeakIntegrand peek{[](const Instant&, const History& h, const MarkView&) {
                             return test_fn({h.wiener(h.last_index() + 1)(0)});
                           },
                           MomentClass::square};
  const NoisePath p = simulate_path(spec, uniform_grid(1.0, 8), 1, 0);
  CHECK_THROWS_AS(integrate(peek, spec, p, 1.0), AnticipationError);
  const History h(p, 0.5);
  CHECK(h.last_index() == 4);
  CHECK_THROWS_AS(h.truncated_to(0.75), AnticipationError);
  CHECK_NOTHROW(h.truncated_to(0.25));
}

TEST_CASE("localization") {
  const MvmSpec spec = wiener_only(2);
  const WeakIntegrand x = exp_local(test_fn({1, 0}), test_fn({0, 1}));
  const StoppingRule rule = [](const History& h, unsigned n) {
    return std::abs(h.wiener_now()(1)) >= 0.25 * n;
  };
  const StoppingRule at_zero = [](const History&, unsigned) { return true; };
  const StoppingRule never = [](const History&, unsigned) { return false; };
  for (std::uint64_t id = 0; id < 30; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 32), 6, id);
    const LocalizedIntegral li = integrate_localized(x, spec, p, 1.0, rule, 4);
    CHECK(li.compatibility_gap == 0.0);
    for (std::size_t n = 1; n < li.stopping_times.size(); ++n)
      CHECK(li.stopping_times[n] >= li.stopping_times[n - 1]);
    if (li.value) CHECK(*li.value == integrate(x, spec, p, 1.0));

    const LocalizedIntegral z = integrate_localized(x, spec, p, 0.0, at_zero, 2);
    REQUIRE(z.value.has_value());
    CHECK(*z.value == 0.0);
    const WeakIntegrand sq = feedback(test_fn({1, 1}), test_fn({1, 0}));
    const LocalizedIntegral full = integrate_localized(sq, spec, p, 1.0, never, 2);
    REQUIRE(full.value.has_value());
    CHECK(*full.value == integrate(sq, spec, p, 1.0));
  }
  CHECK_THROWS_AS(integrate_localized(x, spec, simulate_path(spec, uniform_grid(1.0, 4), 1, 0), 1.0, never, 0),
                  DomainError);
}

TEST_CASE("stopped and restricted integrals") {
  const MvmSpec spec = mixed_spec();
  const WeakIntegrand x = feedback(test_fn({1, 0.5}), test_fn({1, 0}));
  const TestFunction obs = test_fn({0, 1});
  const Event pos = [obs](const History& h) { return h.wiener_pairing(h.last_index(), obs) > 0.0; };
  const Event none = [](const History&) { return false; };
  for (std::uint64_t id = 0; id < 30; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 3, id);
    for (double sigma : {0.0, 0.5, 1.0}) {
      const PathwiseComparison c = stopped_integral_identity_check(x, spec, p, sigma, 1.0);
      CHECK(c.holds(1e-12));
      if (sigma == 0.0) CHECK(c.lhs == 0.0);
    }
    CHECK(subinterval_restriction_check(x, spec, p, 0.25, 0.75, pos, 1.0).holds(1e-12));
    CHECK(subinterval_restriction_check(x, spec, p, 0.25, 0.75, {}, 0.5).holds(1e-12));
    const PathwiseComparison e = subinterval_restriction_check(x, spec, p, 0.25, 0.75, none, 1.0);
    CHECK(e.lhs == 0.0);
    CHECK(e.rhs == 0.0);
  }
}

TEST_CASE("sum decomposition") {
  const MvmSpec s1(Matrix::Identity(2, 2), LevyMeasure(2, {}));
  const MvmSpec s2(Matrix::Zero(2, 2), LevyMeasure(2, {{dual({1, 1}), 2.0}}));
  const SumMvm sum = sum_mvm(s1, s2);
  const WeakIntegrand x = feedback(test_fn({1, -1}), test_fn({1, 0}));
  const auto grid = uniform_grid(1.0, 16);
  for (std::uint64_t id = 0; id < 30; ++id) {
    const NoisePath p1 = simulate_path(s1, grid, 5, id, 0), p2 = simulate_path(s2, grid, 5, id, 1);
    CHECK(sum_decomposition_check(x, sum, s1, s2, p1, p2, 1.0).holds(1e-12));
  }
}

TEST_CASE("Fubini and linearity") {
  const MvmSpec spec = mixed_spec();
  const WeakIntegrand a = feedback(test_fn({1, 0}), test_fn({0, 1}));
  const WeakIntegrand b = deterministic_integrand([](double r, const MarkView&) { return test_fn({r, 1 - r}); });
  const WeakIntegrand c = exp_local(test_fn({0, 1}), test_fn({1, 0}));
  for (std::uint64_t id = 0; id < 30; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 7, id);
    const PathwiseComparison one = fubini_check({{1.0, a}}, spec, p, 1.0);
    CHECK(one.lhs == one.rhs);
    CHECK(fubini_check({{0.3, a}, {-1.7, b}, {2.5, c}, {0.1, a}, {1.0, b}}, spec, p, 1.0).holds(1e-10));
    const double lin = integrate(linear_combination({{2.0, a}, {1.0, b}}), spec, p, 0.5);
    CHECK(lin == doctest::Approx(2.0 * integrate(a, spec, p, 0.5) + integrate(b, spec, p, 0.5)).epsilon(1e-13));
  }
}

TEST_CASE("integrand dimension is checked") {
  const MvmSpec spec = wiener_only(2);
  const WeakIntegrand wrong = deterministic_integrand([](double, const MarkView&) { return test_fn({1, 2, 3}); });
  CHECK_THROWS_AS(integrate(wrong, spec, simulate_path(spec, uniform_grid(1.0, 4), 1, 0), 1.0), DimensionError);
}
