#pragma once

#include "nucspde/space.hpp"

#include <string>
#include <vector>

namespace nucspde {

struct SemigroupBound {
  double M = 1.0;
  double theta = 0.0;
};

// S(t) acts coordinatewise as exp((c - lambda_j) t). The shift c defaults to 0.
class DiagonalSemigroup {
 public:
  explicit DiagonalSemigroup(Vector spectrum, double shift = 0.0);

  // "linear": 1+j, "quadratic": (1+j)^2, "zero": the identity semigroup.
  static DiagonalSemigroup from_tag(const std::string& tag, std::size_t dim, double shift = 0.0);

  std::size_t dim() const { return static_cast<std::size_t>(spectrum_.size()); }
  const Vector& spectrum() const { return spectrum_; }
  double shift() const { return shift_; }

  Vector factors(double t) const;
  double factor(std::size_t j, double t) const;

 private:
  Vector spectrum_;
  double shift_;
};

TestFunction apply(const DiagonalSemigroup& S, double t, const TestFunction& psi);
DualVector apply_dual(const DiagonalSemigroup& S, double t, const DualVector& g);
TestFunction generator_apply(const DiagonalSemigroup& S, const TestFunction& psi);

// Returns (M, theta) with p_n(S(t)psi) <= M e^{theta t} p_n(psi), verified on the grid.
SemigroupBound certify_bound(const DiagonalSemigroup& S, const SeminormFamily& family, unsigned level,
                             const std::vector<double>& grid);

}  // namespace nucspde
