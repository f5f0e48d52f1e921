#pragma once

#include "nucspde/ensemble.hpp"
#include "nucspde/noise.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace nucspde::testing {

inline std::shared_ptr<const TimeGrid> uniform_grid(double T, std::size_t steps) {
  return std::make_shared<const TimeGrid>(TimeGrid::uniform(T, steps));
}

inline MvmSpec wiener_only(std::size_t d) {
  return MvmSpec(Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)), LevyMeasure(d, {}));
}

inline MvmSpec poisson_only(std::size_t d, std::vector<LevyAtom> atoms) {
  const auto n = static_cast<Eigen::Index>(d);
  return MvmSpec(Matrix::Zero(n, n), LevyMeasure(d, std::move(atoms)));
}

inline DualVector dual(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return DualVector(x);
}

inline TestFunction test_fn(std::initializer_list<double> v) { return TestFunction(dual(v).coeffs()); }

// |mean - target| <= 4 stderr + |bias|
inline bool within_mc(const McEstimate& e, double target, double bias = 0.0) {
  return std::abs(e.mean - target) <= 4.0 * e.std_error + std::abs(bias);
}

}  // namespace nucspde::testing
