#pragma once

#include "nucspde/weak_integral.hpp"

#include <functional>
#include <vector>

namespace nucspde {

using OperatorEvaluator = std::function<Matrix(const Instant&, const History&, const MarkView&)>;

// R(r, omega, u) as a rows x cols matrix (rows: Psi coordinates, cols: Phi coordinates).
struct OperatorIntegrand {
  OperatorEvaluator eval;
  MomentClass moment = MomentClass::square;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

OperatorIntegrand deterministic_operator(std::size_t rows, std::size_t cols,
                                         std::function<Matrix(double, const MarkView&)> f);
// S o R
OperatorIntegrand compose(const Matrix& s, const OperatorIntegrand& r);
OperatorIntegrand stopped(const OperatorIntegrand& r, double sigma);
OperatorIntegrand restricted(const OperatorIntegrand& r, double s0, double t0, Event f0);
OperatorIntegrand linear_combination(std::vector<std::pair<double, OperatorIntegrand>> terms);
// r -> R(r)' psi as a weak integrand.
WeakIntegrand transpose_apply(const OperatorIntegrand& r, const TestFunction& psi);

struct StrongIntegralPath {
  std::vector<DualVector> values;  // grid points 0..K
  unsigned level = 0;
};

StrongIntegralPath integrate_strong_path(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path);
DualVector integrate_strong(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path, double t);
// Matrix-vector accumulation kept as an independent route for cross-checks.
DualVector integrate_strong_direct(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path, double t);

// ||R||^2 of L2(Phi'_{q_{r,u}}, Psi'_p) for one mark.
double hs_norm_squared(const Matrix& r, const MvmSpec& spec, const MarkView& mark, const SeminormFamily& family,
                       unsigned level);
// Integral of the above against mu = delta_0 + nu restricted to the domain.
double hs_density(const std::function<Matrix(const MarkView&)>& r_at, const MvmSpec& spec,
                  const SeminormFamily& family, unsigned level);

// int_0^t hs_density dr for deterministic R, adaptive Simpson.
double strong_norm_quadrature(const std::function<Matrix(double, const MarkView&)>& r, const MvmSpec& spec,
                              const SeminormFamily& family, unsigned level, double t, double tol = 1e-10);

struct HsFactorization {
  unsigned level = 0;
  double norm_squared = 0.0;          // ||R~||^2_{s,p,T}
  std::vector<double> level_norms;    // norm squared at levels 0..max tried
  bool within_budget = false;
  OperatorIntegrand factor;           // coordinates in the orthonormal basis of Psi'_p
  double reconstruction_error = 0.0;  // max |i'_p R~ - R| on the samples
};

// Smallest level p <= max_level with ||R~||^2_{s,p,T} <= budget. With no
// sample paths R is treated as deterministic and integrated by quadrature.
HsFactorization factorize(const OperatorIntegrand& r, const MvmSpec& spec, const SeminormFamily& family,
                          std::shared_ptr<const TimeGrid> grid, const std::vector<const NoisePath*>& samples,
                          double budget, unsigned max_level = 8);

struct VectorComparison {
  DualVector lhs;
  DualVector rhs;
  double deviation() const { return (lhs.coeffs() - rhs.coeffs()).cwiseAbs().maxCoeff(); }
  bool holds(double tol) const { return deviation() <= tol; }
};

VectorComparison weak_strong_compatibility(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                           double t);
VectorComparison pushforward_check(const OperatorIntegrand& r, const Matrix& s, const MvmSpec& spec,
                                   const NoisePath& path, double t);
VectorComparison strong_stopped_check(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                      double sigma, double t);
VectorComparison strong_restriction_check(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                          double s0, double t0, const Event& f0, double t);

}  // namespace nucspde
