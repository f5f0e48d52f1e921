#pragma once

#include "nucspde/spde.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nucspde {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct EquationConfig {
  double beta = 0.0;
  Vector offset;        // c in B(r,g) = beta g + c
  Matrix sigma_matrix;  // additive part of F
  double sigma = 0.0;   // multiplicative part of F
  Vector phi0;
  Vector z0;
};

struct LevyPatchConfig {
  Matrix q;
  std::vector<LevyAtom> atoms;
  std::vector<unsigned> ball_levels;
  Vector drift;
  EquationConfig equation;
};

struct Scenario {
  std::string version = "1";
  std::size_t dim = 8;
  double weight_exponent = 2.0;
  Vector spectrum;
  double shift = 0.0;
  Matrix q;
  std::vector<LevyAtom> atoms;
  double horizon = 1.0;
  std::size_t steps = 256;
  PicardOptions picard;
  std::size_t paths = 100000;
  std::size_t pathwise_paths = 1000;
  std::size_t residual_paths = 4000;  // solves on three grids per path
  std::uint64_t seed = 7;
  EquationConfig equation;
  LevyPatchConfig levy;
  nlohmann::json isometry_integrands;  // array of named weak integrands
  nlohmann::json strong_integrands;    // array of named operator integrands

  SeminormFamily family() const { return SeminormFamily(dim, weight_exponent); }
  DiagonalSemigroup semigroup() const { return DiagonalSemigroup(spectrum, shift); }
  MvmSpec spec() const;
  std::shared_ptr<const TimeGrid> grid() const;
  std::shared_ptr<const TimeGrid> grid(std::size_t steps_override) const;
  Coefficients coefficients(const EquationConfig& eq, const MvmSpec& spec) const;
  LevyTriplet levy_triplet() const;
};

nlohmann::json default_scenario_json();
Scenario default_scenario();
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

// Named weak integrands: "constant", "linear-in-time", "affine-in-time",
// "state-feedback", "exp-local", "simple".
struct WeakIntegrandEntry {
  std::string label;
  std::string name;
  std::string noise = "full";  // wiener | jumps | full
  WeakIntegrand integrand;
  std::function<TestFunction(double, const MarkView&)> deterministic;  // empty unless deterministic
  std::optional<SimpleIntegrand> simple;
};

WeakIntegrandEntry make_weak_integrand(const nlohmann::json& j, std::size_t dim, const std::string& pointer);
// The scenario noise restricted to the entry's "noise" selector.
MvmSpec noise_for(const std::string& selector, const MvmSpec& full);

// Named operator integrands: "identity", "diagonal", "rank1", "state-feedback", "matrix".
struct OperatorIntegrandEntry {
  std::string label;
  std::string name;
  OperatorIntegrand integrand;
  std::function<Matrix(double, const MarkView&)> deterministic;
};

OperatorIntegrandEntry make_operator_integrand(const nlohmann::json& j, std::size_t dim, const std::string& pointer);

// Vector and matrix fields as accepted in configs.
Vector parse_vector(const nlohmann::json& j, std::size_t dim, const std::string& pointer);
Matrix parse_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& pointer);

}  // namespace nucspde
