#include "nucspde/semigroup.hpp"

#include <algorithm>
#include <cmath>

namespace nucspde {

DiagonalSemigroup::DiagonalSemigroup(Vector spectrum, double shift)
    : spectrum_(std::move(spectrum)), shift_(shift) {
  if (spectrum_.size() == 0) throw DimensionError("semigroup spectrum is empty");
  if (!spectrum_.allFinite() || !std::isfinite(shift_)) throw DomainError("semigroup spectrum must be finite");
  if (spectrum_.minCoeff() < 0.0) throw DomainError("semigroup spectrum must be nonnegative");
  if (shift_ < 0.0) throw DomainError("semigroup shift must be nonnegative");
}

DiagonalSemigroup DiagonalSemigroup::from_tag(const std::string& tag, std::size_t dim, double shift) {
  Vector s(static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < dim; ++j) {
    const double x = 1.0 + static_cast<double>(j);
    if (tag == "linear") s(static_cast<Eigen::Index>(j)) = x;
    else if (tag == "quadratic") s(static_cast<Eigen::Index>(j)) = x * x;
    else if (tag == "zero") s(static_cast<Eigen::Index>(j)) = 0.0;
    else throw DomainError("unknown spectrum tag '" + tag + "'");
  }
  return DiagonalSemigroup(std::move(s), shift);
}

Vector DiagonalSemigroup::factors(double t) const {
  if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
  return ((shift_ - spectrum_.array()) * t).exp().matrix();
}

double DiagonalSemigroup::factor(std::size_t j, double t) const {
  return std::exp((shift_ - spectrum_(static_cast<Eigen::Index>(j))) * t);
}

TestFunction apply(const DiagonalSemigroup& S, double t, const TestFunction& psi) {
  if (psi.dim() != S.dim()) throw DimensionError("semigroup apply: dimension mismatch");
  return TestFunction(S.factors(t).cwiseProduct(psi.coeffs()));
}

DualVector apply_dual(const DiagonalSemigroup& S, double t, const DualVector& g) {
  if (g.dim() != S.dim()) throw DimensionError("semigroup apply_dual: dimension mismatch");
  return DualVector(S.factors(t).cwiseProduct(g.coeffs()));
}

TestFunction generator_apply(const DiagonalSemigroup& S, const TestFunction& psi) {
  if (psi.dim() != S.dim()) throw DimensionError("generator: dimension mismatch");
  return TestFunction((S.shift() - S.spectrum().array()).matrix().cwiseProduct(psi.coeffs()));
}

SemigroupBound certify_bound(const DiagonalSemigroup& S, const SeminormFamily& family, unsigned level,
                             const std::vector<double>& grid) {
  if (family.dim() != S.dim()) throw DimensionError("certify_bound: dimension mismatch");
  SemigroupBound b{1.0, std::max(0.0, S.shift() - S.spectrum().minCoeff())};
  // Diagonal action commutes with diagonal weights, so the worst direction is a basis vector.
  for (double t : grid) {
    const double limit = b.M * std::exp(b.theta * t) * (1.0 + 1e-12);
    for (std::size_t j = 0; j < S.dim(); ++j) {
      const TestFunction e = TestFunction::basis(S.dim(), j);
      if (seminorm(family, level, apply(S, t, e)) > limit * seminorm(family, level, e))
        throw DomainError("semigroup bound failed at t=" + std::to_string(t));
    }
  }
  return b;
}

}  // namespace nucspde
