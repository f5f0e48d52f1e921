#include "nucspde/ensemble.hpp"
#include "nucspde/scenario.hpp"
#include "nucspde/weak_integral.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace nucspde;

namespace {

struct Workload {
  Scenario scenario = default_scenario();
  MvmSpec spec = scenario.spec();
  std::shared_ptr<const TimeGrid> grid = scenario.grid();
  WeakIntegrand x{[](const Instant&, const History& h, const MarkView&) {
                    Vector v = Vector::Zero(static_cast<Eigen::Index>(h.dim()));
                    v(0) = 1.0 + 0.5 * std::tanh(h.wiener_now()(1));
                    return TestFunction(std::move(v));
                  },
                  MomentClass::square};

  PathStatistic statistic() const {
    return [this](std::uint64_t id, std::span<double> out) {
      const double v = integrate(x, spec, simulate_path(spec, grid, scenario.seed, id), grid->horizon());
      out[0] = v;
      out[1] = v * v;
    };
  }
};

const Workload& workload() {
  static const Workload w;
  return w;
}

void BM_EnsembleSerial(benchmark::State& state) {
  const auto stat = workload().statistic();
  for (auto _ : state) {
    auto t = run_ensemble_serial({"i", "i2"}, static_cast<std::size_t>(state.range(0)), stat);
    benchmark::DoNotOptimize(t.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EnsembleOpenMP(benchmark::State& state) {
  const auto stat = workload().statistic();
  const ExecutionConfig exec{static_cast<int>(state.range(1))};
  for (auto _ : state) {
    auto t = run_ensemble({"i", "i2"}, static_cast<std::size_t>(state.range(0)), stat, exec);
    benchmark::DoNotOptimize(t.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleOpenMP)->Args({256, 0})->Args({2048, 0})->Args({2048, 2})->Args({2048, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
