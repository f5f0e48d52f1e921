#pragma once

#include "nucspde/report.hpp"
#include "nucspde/scenario.hpp"

#include <string>
#include <vector>

namespace nucspde {

// isometry, mvm-axioms, fubini, strong, convolution, solver, levy-patch
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);

// Runs one suite, "all" (every suite in order) or "empty". Throws
// std::invalid_argument for an unknown name.
VerificationReport run_suite(const Scenario& scenario, const std::string& name, const ExecutionConfig& exec = {});

// Second moment of the left-point scheme for a deterministic weak integrand,
// split into the parts the suites use as oracles.
class SchemeOracle {
 public:
  using Fn = std::function<TestFunction(double, const MarkView&)>;
  SchemeOracle(Fn f, MvmSpec spec, std::shared_ptr<const TimeGrid> grid);

  // int_a^b [Q(X(r,0))^2 + sum_k c_k u_k[X(r,u_k)]^2] dr
  double norm(double a, double b) const;
  // sum over t_k in [t_k0, t_k1) of dt Q(X(t_k,0))^2
  double wiener_sum(std::size_t k0, std::size_t k1) const;
  // Mean of the scheme on (t_k0, t_k1]: exact jump mean minus left-point compensator.
  double mismatch(std::size_t k0, std::size_t k1) const;
  // E|I_{t_k1} - I_{t_k0}|^2 for the scheme.
  double scheme(std::size_t k0, std::size_t k1) const;

 private:
  double wiener_density(double r) const;
  double jump_value(std::size_t atom, double r) const;
  double jump_density(double r) const;

  Fn f_;
  MvmSpec spec_;
  std::shared_ptr<const TimeGrid> grid_;
};

// E X_k for affine coefficients: the Wiener part and compensated jumps drop out.
Matrix mean_flow(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                 const DualVector& z0, const TimeGrid& grid);

}  // namespace nucspde
