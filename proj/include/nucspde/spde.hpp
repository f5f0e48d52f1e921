#pragma once

#include "nucspde/semigroup.hpp"
#include "nucspde/strong_integral.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nucspde {

struct Envelope {
  std::function<double(const TestFunction&, double)> value;
  bool time_homogeneous = true;
};

struct Coefficients {
  std::size_t dim_psi = 0;
  std::size_t dim_phi = 0;
  std::function<DualVector(double, const DualVector&)> drift;                  // B(r, g)
  std::function<Matrix(double, const MarkView&, const DualVector&)> noise;     // F(r, u, g)
  // Optional F(r, u, g) f without forming the matrix.
  std::function<Vector(double, const MarkView&, const DualVector&, const Vector&)> noise_apply;
  bool mark_independent = false;  // F(r, u, g) does not depend on u
  Envelope a;
  Envelope b;
};

Vector apply_noise(const Coefficients& coeffs, double r, const MarkView& m, const DualVector& g, const Vector& f);

// B(r,g) = beta g + c with a(psi) = max(|beta|, |c[psi]|).
Coefficients with_linear_drift(Coefficients base, double beta, const DualVector& c);
// F(r,u,g) f = Sigma f + sigma f[phi0] g, with
// b(psi) = max(sqrt(int q(Sigma' psi)^2 dmu), |sigma| sqrt(int q(phi0)^2 dmu)).
Coefficients with_affine_noise(Coefficients base, const Matrix& sigma_matrix, double sigma, const TestFunction& phi0,
                               const MvmSpec& spec);
Coefficients linear_coefficients(std::size_t dim, double beta, const DualVector& c, const Matrix& sigma_matrix,
                                 double sigma, const TestFunction& phi0, const MvmSpec& spec);

class CoefficientError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CoefficientCheck {
  double worst_growth_ratio = 0.0;     // max lhs / rhs over samples, growth
  double worst_lipschitz_ratio = 0.0;  // max lhs / rhs over samples, Lipschitz
  std::size_t samples = 0;
  bool passed() const { return worst_growth_ratio <= 1.0 + 1e-9 && worst_lipschitz_ratio <= 1.0 + 1e-9; }
};

// Samples the growth and Lipschitz conditions (b^2 on the right in both).
CoefficientCheck check_coefficients(const Coefficients& coeffs, const MvmSpec& spec, const SeminormFamily& family,
                                    unsigned level, double T, std::uint64_t seed, std::size_t samples = 200);

struct ContractionReport {
  double damping = 0.0;
  double horizon = 0.0;
  double a_integral = 0.0;  // int_0^T sup_K a^2 dr
  double b_integral = 0.0;  // int_0^T sup_K b^2 dr
  SemigroupBound bound;
  double c1 = 0.0;
  double c2 = 0.0;
  double combined = 0.0;  // sqrt(2 c1 + 2 c2)
  bool contracts() const { return combined < 1.0; }
};

// K = { e_j / sqrt(w_j(level)) }.
std::vector<TestFunction> unit_ball_basis(const SeminormFamily& family, unsigned level);

ContractionReport contraction_constants(const Coefficients& coeffs, const std::vector<TestFunction>& k_set,
                                        const SemigroupBound& bound, double T, double damping);
// Constants straight from envelope integrals.
ContractionReport contraction_constants(double a_integral, double b_integral, const SemigroupBound& bound, double T,
                                        double damping);
// Smallest damping with combined constant below `target` (doubling bracket, then bisection).
double auto_damping(const Coefficients& coeffs, const std::vector<TestFunction>& k_set, const SemigroupBound& bound,
                    double T, double target = 0.5);

struct PicardOptions {
  unsigned max_iter = 50;
  unsigned min_iter = 0;
  double tol = 1e-10;
  std::optional<double> damping;  // nullopt: auto
  unsigned norm_level = 1;
  bool record_profiles = false;
};

struct SolutionPath {
  std::shared_ptr<const TimeGrid> grid;
  Matrix states;  // dim_psi x (K+1)
  DualVector initial;
  unsigned iterations = 0;
  double residual = 0.0;  // last weighted distance
  std::vector<double> distance_trace;
  // profiles[i](k) = p'_n(X^{i+1}_k - X^i_k)^2
  std::vector<Vector> profiles;

  DualVector state(std::size_t k) const { return DualVector(states.col(static_cast<Eigen::Index>(k))); }
};

class PicardDivergence : public std::runtime_error {
 public:
  PicardDivergence(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

class MildSolver {
 public:
  MildSolver(Coefficients coeffs, DiagonalSemigroup semigroup, MvmSpec spec, SeminormFamily family,
             PicardOptions options, double T, std::uint64_t check_seed = 0);

  SolutionPath solve(const DualVector& z0, const NoisePath& path) const;
  // One application of the mild map at grid scale.
  Matrix apply_map(const Matrix& x, const DualVector& z0, const NoisePath& path) const;
  double distance(const Matrix& x, const Matrix& y, const TimeGrid& grid) const;

  double damping() const { return damping_; }
  const ContractionReport& contraction() const { return report_; }
  const CoefficientCheck& coefficient_check() const { return check_; }
  const Coefficients& coefficients() const { return coeffs_; }
  const DiagonalSemigroup& semigroup() const { return semigroup_; }
  const MvmSpec& spec() const { return spec_; }
  const SeminormFamily& family() const { return family_; }
  const PicardOptions& options() const { return options_; }

 private:
  struct GridFactors {
    Matrix step;  // S(dt_k) per column
    Matrix from0;  // S(t_{k+1}) z0 per column
  };
  GridFactors grid_factors(const DualVector& z0, const TimeGrid& grid) const;
  Matrix apply_map(const Matrix& x, const DualVector& z0, const NoisePath& path, const GridFactors& f) const;

  Coefficients coeffs_;
  DiagonalSemigroup semigroup_;
  MvmSpec spec_;
  SeminormFamily family_;
  PicardOptions options_;
  CoefficientCheck check_;
  ContractionReport report_;
  double damping_ = 0.0;
  Vector compensator_;  // sum of c_a u_a over the domain
};

SolutionPath solve_mild(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                        const SeminormFamily& family, const DualVector& z0, std::shared_ptr<const TimeGrid> grid,
                        std::uint64_t seed, std::uint64_t path_id, const PicardOptions& options);

// r -> S(t-r)' R(r), zero for r >= t.
OperatorIntegrand convolution_integrand(const OperatorIntegrand& r, const DiagonalSemigroup& semigroup, double t);
DualVector stochastic_convolution(const OperatorIntegrand& r, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                                  const NoisePath& path, double t);
// F(r, u, X_{step(r)}) along a grid state path.
OperatorIntegrand state_noise_integrand(const Coefficients& coeffs, const Matrix& states);
// Left-point sum of S(t-t_i)' B(t_i, X_i) dt_i over t_i < t.
DualVector deterministic_convolution(const Coefficients& coeffs, const Matrix& states,
                                     const DiagonalSemigroup& semigroup, const TimeGrid& grid, double t);

// X_t[psi] - X_0[psi] - int (X_r[A psi] + B(r,X_r)[psi]) dr - I_t(F' psi) at grid time t.
double weak_residual(const Matrix& states, const Coefficients& coeffs, const DiagonalSemigroup& semigroup,
                     const MvmSpec& spec, const NoisePath& path, const TestFunction& psi, double t);

struct NestedDomains {
  SeminormFamily family;
  std::vector<unsigned> levels;  // rho_n level for n = 1..N
};

struct LevySolution {
  std::vector<SolutionPath> levels;
  std::vector<AtomMask> domains;       // U_1 .. U_N
  std::vector<double> stopping_times;  // tau_n, +inf when no jump leaves U_n
  Matrix patched;
  double coupling_deviation = 0.0;  // max over m < n, grid t <= tau_m
  bool escaped = false;             // a jump outside U_N before T
};

std::vector<AtomMask> nested_domains(const LevyMeasure& levy, const NestedDomains& balls);

// Level n solves with jumps in U_n compensated and the drift
// B_n = B + sum_{U_n \ U_1} c_a F(., a, .) u_a.
class LevySolver {
 public:
  LevySolver(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const LevyTriplet& triplet,
             const NestedDomains& balls, const SeminormFamily& family, const PicardOptions& options, double T,
             std::uint64_t check_seed = 0);

  LevySolution solve(const DualVector& z0, const NoisePath& path) const;
  const std::vector<AtomMask>& domains() const { return domains_; }
  const MildSolver& level(std::size_t n) const { return solvers_.at(n); }
  const LevyTriplet& triplet() const { return triplet_; }
  const Coefficients& coefficients() const { return coeffs_; }

 private:
  LevyTriplet triplet_;
  Coefficients coeffs_;
  std::vector<AtomMask> domains_;
  std::vector<MildSolver> solvers_;
};

// Localized solves on shared increments, patched along tau_n. The drift of
// the triplet enters only the path reconstruction, not the equation.
LevySolution solve_levy(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const LevyTriplet& triplet,
                        const NestedDomains& balls, const DualVector& z0, const NoisePath& path,
                        const PicardOptions& options, std::uint64_t check_seed = 0);

// Residual against the full equation: compensated jumps in U_1, raw jumps outside.
double levy_weak_residual(const Matrix& states, const Coefficients& coeffs, const DiagonalSemigroup& semigroup,
                          const LevyTriplet& triplet, AtomMask small, const NoisePath& path, const TestFunction& psi,
                          double t);

}  // namespace nucspde
