#include "nucspde/ensemble.hpp"
#include "nucspde/noise.hpp"
#include "nucspde/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace nucspde;
using namespace nucspde::testing;

TEST_CASE("Philox4x32-10 known answers") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) == B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Philox streams are disjoint and reproducible") {
  Philox4x32 a(7, 3, StreamTag::wiener), b(7, 3, StreamTag::wiener), c(7, 3, StreamTag::jumps), d(7, 4, StreamTag::wiener);
  for (int i = 0; i < 16; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
  }
}

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::uniform(2.0, 8);
  CHECK(g.steps() == 8);
  CHECK(g.time(8) == 2.0);
  CHECK(g.index_of(0.75) == std::optional<std::size_t>(3));
  CHECK_FALSE(g.index_of(0.7).has_value());
  CHECK(g.floor_index(0.7) == 2);
  CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(TimeGrid::uniform(0.0, 4), DomainError);
}

TEST_CASE("zero measure gives the zero path") {
  const auto n = Eigen::Index{3};
  const MvmSpec spec(Matrix::Zero(n, n), LevyMeasure(3, {}));
  const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 1, 0);
  CHECK(p.wiener_matrix().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.jumps().empty());
  CHECK(mvm_evaluate(spec, p, 0.0, 1.0, RingSet::wiener(), test_fn({1, 2, 3})) == 0.0);
}

TEST_CASE("Wiener variance and Poisson count") {
  const auto grid1 = uniform_grid(1.0, 4);
  const MvmSpec w = wiener_only(1);
  const auto var = run_ensemble_serial({"w2"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const NoisePath p = simulate_path(w, grid1, 42, id);
    out[0] = p.wiener(4)(0) * p.wiener(4)(0);
  });
  CHECK(within_mc(var.estimate(0), 1.0));

  const MvmSpec pois = poisson_only(1, {{dual({1}), 3.0}});
  const auto grid2 = uniform_grid(2.0, 4);
  const auto count = run_ensemble_serial({"n"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    out[0] = static_cast<double>(simulate_path(pois, grid2, 42, id).jumps().size());
  });
  CHECK(within_mc(count.estimate(0), 6.0));
}

TEST_CASE("mvm axioms on a path") {
  const MvmSpec spec(Matrix::Identity(2, 2), LevyMeasure(2, {{dual({1, 0}), 2.0}, {dual({0.5, -1}), 1.0}}));
  const TestFunction phi = test_fn({1, 2});
  for (std::uint64_t id = 0; id < 50; ++id) {
    const NoisePath p = simulate_path(spec, uniform_grid(1.0, 8), 9, id);
    CHECK(mvm_evaluate(spec, p, 0.25, 0.75, RingSet::empty(), phi) == 0.0);
    CHECK(mvm_evaluate(spec, p, 0.5, 0.5, RingSet::everything(2), phi) == 0.0);
    const double whole = mvm_evaluate(spec, p, 0.25, 1.0, RingSet::everything(2), phi);
    const double parts = mvm_evaluate(spec, p, 0.25, 1.0, RingSet::wiener(), phi) +
                         mvm_evaluate(spec, p, 0.25, 1.0, RingSet::of_atoms(1), phi) +
                         mvm_evaluate(spec, p, 0.25, 1.0, RingSet::of_atoms(2), phi);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-14));
    const double split = mvm_evaluate(spec, p, 0.25, 0.5, RingSet::everything(2), phi) +
                         mvm_evaluate(spec, p, 0.5, 1.0, RingSet::everything(2), phi);
    CHECK(whole == doctest::Approx(split).epsilon(1e-13));
  }
  const MvmSpec small = spec.restricted(atom_bit(0));
  const NoisePath p = simulate_path(small, uniform_grid(1.0, 8), 9, 0);
  CHECK_THROWS_AS(mvm_evaluate(small, p, 0.0, 1.0, RingSet::of_atoms(2), phi), DomainError);
  CHECK_THROWS_AS(mvm_evaluate(spec, p, 0.0, 0.3, RingSet::wiener(), phi), DomainError);
}

TEST_CASE("compensated Poisson moments") {
  const MvmSpec spec = poisson_only(2, {{dual({1, 0}), 3.0}});
  const TestFunction phi = test_fn({2, 5});
  CHECK(spec.second_moment(RingSet::of_atoms(1), phi, 0.0, 1.0) == 12.0);
  const auto grid = uniform_grid(1.0, 4);
  const auto t = run_ensemble_serial({"m", "m2"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const double v = mvm_evaluate(spec, simulate_path(spec, grid, 5, id), 0.0, 1.0, RingSet::of_atoms(1), phi);
    out[0] = v;
    out[1] = v * v;
  });
  CHECK(within_mc(t.estimate(0), 0.0));
  CHECK(within_mc(t.estimate(1), 12.0));

  const NoisePath quiet(grid, Matrix::Zero(2, 5), {}, 0, 0);
  CHECK(compensated_poisson_integral(spec, quiet, 1.0, 1, test_fn({1, 0})) == -3.0);
  const NoisePath one(grid, Matrix::Zero(2, 5), {{0.4, 0}}, 0, 0);
  CHECK(compensated_poisson_integral(spec, one, 0.5, 1, test_fn({1, 0})) == doctest::Approx(1.0 - 1.5));
  CHECK(compensated_poisson_integral(spec, one, 0.25, 1, test_fn({1, 0})) == doctest::Approx(-0.75));
}

TEST_CASE("paths are reproducible") {
  const MvmSpec spec(Matrix::Identity(3, 3), LevyMeasure(3, {{dual({1, 0, 0}), 4.0}}));
  const auto grid = uniform_grid(1.0, 32);
  CHECK(simulate_path(spec, grid, 11, 5) == simulate_path(spec, grid, 11, 5));
  CHECK_FALSE(simulate_path(spec, grid, 11, 5) == simulate_path(spec, grid, 11, 6));
  CHECK_FALSE(simulate_path(spec, grid, 11, 5) == simulate_path(spec, grid, 12, 5));
}

TEST_CASE("sum of independent measures") {
  Matrix q1 = Matrix::Zero(2, 2), q2 = Matrix::Zero(2, 2);
  q1(0, 0) = 1.0;
  q2(0, 0) = 2.0;
  q2(1, 1) = 1.0;
  const MvmSpec s1(q1, LevyMeasure(2, {{dual({1, 0}), 1.0}}));
  const MvmSpec s2(q2, LevyMeasure(2, {{dual({0, 1}), 2.0}}));
  const SumMvm sum = sum_mvm(s1, s2);
  CHECK(sum.offset == 1);
  CHECK(sum.spec.levy().size() == 2);
  CHECK(sum.spec.covariance()(0, 0) == 3.0);
  CHECK(sum.embed_second(RingSet::of_atoms(1)) == RingSet::of_atoms(2));
  const TestFunction phi = test_fn({1, 1});
  CHECK(sum.spec.second_moment(RingSet::everything(2), phi, 0, 1) ==
        doctest::Approx(s1.second_moment(RingSet::everything(1), phi, 0, 1) +
                        s2.second_moment(RingSet::everything(1), phi, 0, 1)));

  const auto grid = uniform_grid(1.0, 4);
  const auto t = run_ensemble_serial({"v"}, 20000, [&](std::uint64_t id, std::span<double> out) {
    const NoisePath p = merge_paths(sum, simulate_path(s1, grid, 3, id, 0), simulate_path(s2, grid, 3, id, 1));
    const double v = mvm_evaluate(sum.spec, p, 0.0, 1.0, RingSet::wiener(), test_fn({1, 0}));
    out[0] = v * v;
  });
  CHECK(within_mc(t.estimate(0), 3.0));

  const NoisePath a = simulate_path(s1, grid, 3, 0, 0);
  const NoisePath zero(grid, Matrix::Zero(2, 5), {}, 3, 0);
  const MvmSpec none(Matrix::Zero(2, 2), LevyMeasure(2, {}));
  const SumMvm trivial = sum_mvm(s1, none);
  CHECK(merge_paths(trivial, a, zero) == a);
}

TEST_CASE("radial atomization") {
  const auto atoms = atomize_radial_gaussian(dual({1, 0}), 2.0, 1.0, 1);
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].point[0] == doctest::Approx(0.6744897501960817).epsilon(1e-9));
  CHECK(atoms[0].rate == 2.0);
  const auto many = atomize_radial_gaussian(dual({0, 2}), 3.0, 0.5, 10);
  double rate = 0.0;
  for (std::size_t i = 0; i < many.size(); ++i) {
    rate += many[i].rate;
    if (i > 0) CHECK(many[i].point[1] > many[i - 1].point[1]);
    CHECK(many[i].point[0] == 0.0);
  }
  CHECK(rate == doctest::Approx(3.0));
  CHECK_THROWS_AS(atomize_radial_gaussian(dual({1, 0}), 0.0, 1.0, 4), DomainError);
}

TEST_CASE("coarsening keeps the realization") {
  const MvmSpec spec(Matrix::Identity(2, 2), LevyMeasure(2, {{dual({1, 0}), 5.0}}));
  const NoisePath p = simulate_path(spec, uniform_grid(1.0, 16), 2, 1);
  const NoisePath c = p.coarsen(4);
  CHECK(c.grid().steps() == 4);
  CHECK(c.jumps().size() == p.jumps().size());
  for (std::size_t k = 0; k <= 4; ++k) CHECK((c.wiener(k) - p.wiener(4 * k)).norm() == 0.0);
  const TestFunction phi = test_fn({1, -1});
  CHECK(mvm_evaluate(spec, c, 0.25, 1.0, RingSet::everything(1), phi) ==
        mvm_evaluate(spec, p, 0.25, 1.0, RingSet::everything(1), phi));
  CHECK_THROWS_AS(p.coarsen(3), DomainError);
}

TEST_CASE("Levy path reconstruction") {
  const SeminormFamily fam(2);
  const LevyTriplet tr{dual({0.5, 0}),
                       MvmSpec(Matrix::Zero(2, 2), LevyMeasure(2, {{dual({0.5, 0}), 2.0}, {dual({3, 0}), 1.0}})), 0,
                       1.0};
  CHECK(tr.small_atoms(fam) == atom_bit(0));
  const auto grid = uniform_grid(1.0, 4);
  const NoisePath p(grid, Matrix::Zero(2, 5), {{0.1, 0}, {0.6, 1}}, 0, 0);
  // t m + small jump - t c u + large jump
  CHECK(levy_path_value(tr, fam, p, 4)[0] == doctest::Approx(0.5 + 0.5 - 1.0 + 3.0));
  CHECK(levy_path_value(tr, fam, p, 2)[0] == doctest::Approx(0.25 + 0.5 - 0.5));
}
