#pragma once

#include "nucspde/space.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace nucspde {

using AtomMask = std::uint64_t;
inline constexpr std::size_t kMaxAtoms = 64;

inline AtomMask atom_bit(std::size_t k) { return AtomMask{1} << k; }
inline AtomMask all_atoms(std::size_t n) { return n >= 64 ? ~AtomMask{0} : (atom_bit(n) - 1); }
inline bool has_atom(AtomMask m, std::size_t k) { return (m >> k) & 1u; }

struct LevyAtom {
  DualVector point;
  double rate = 0.0;
};

// Finite atomic Levy measure nu = sum_k c_k delta_{u_k}.
class LevyMeasure {
 public:
  LevyMeasure() = default;
  LevyMeasure(std::size_t dim, std::vector<LevyAtom> atoms);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return atoms_.size(); }
  const LevyAtom& atom(std::size_t k) const { return atoms_.at(k); }
  const std::vector<LevyAtom>& atoms() const { return atoms_; }

  double total_rate(AtomMask mask) const;
  // sum over atoms in mask of c_k u_k[phi]^2
  double second_moment(AtomMask mask, const TestFunction& phi) const;
  // sum over atoms in mask of c_k u_k[phi]
  double first_moment(AtomMask mask, const TestFunction& phi) const;

 private:
  std::size_t dim_ = 0;
  std::vector<LevyAtom> atoms_;
};

// Radial Gaussian component along `direction`: `count` atoms at the equal-mass
// quantile midpoints of |N(0, scale^2)|, each carrying intensity/count.
std::vector<LevyAtom> atomize_radial_gaussian(const DualVector& direction, double intensity, double scale,
                                              std::size_t count);

// Element of the ring: optional Wiener mark {0} plus a set of atoms.
struct RingSet {
  bool zero = false;
  AtomMask atoms = 0;

  static RingSet empty() { return {}; }
  static RingSet wiener() { return {true, 0}; }
  static RingSet of_atoms(AtomMask m) { return {false, m}; }
  static RingSet everything(std::size_t n_atoms) { return {true, all_atoms(n_atoms)}; }

  bool contains_atom(std::size_t k) const { return has_atom(atoms, k); }
  bool disjoint(const RingSet& o) const { return !(zero && o.zero) && (atoms & o.atoms) == 0; }
  RingSet unite(const RingSet& o) const { return {zero || o.zero, atoms | o.atoms}; }
  friend bool operator==(const RingSet&, const RingSet&) = default;
};

class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);
  static TimeGrid uniform(double T, std::size_t steps);

  std::size_t steps() const { return t_.size() - 1; }
  double time(std::size_t k) const { return t_[k]; }
  double dt(std::size_t k) const { return t_[k + 1] - t_[k]; }
  double horizon() const { return t_.back(); }
  const std::vector<double>& times() const { return t_; }
  // Index k with t_k == t up to 1e-12 relative slack.
  std::optional<std::size_t> index_of(double t) const;
  std::size_t require_index(double t) const;
  // Largest k with t_k <= t.
  std::size_t floor_index(double t) const;

 private:
  std::vector<double> t_;
};

class MvmSpec {
 public:
  MvmSpec(Matrix q, LevyMeasure levy);
  MvmSpec(Matrix q, LevyMeasure levy, AtomMask domain);

  std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
  const Matrix& covariance() const { return q_; }
  const Matrix& covariance_sqrt() const { return q_sqrt_; }
  bool has_wiener() const { return has_wiener_; }
  const LevyMeasure& levy() const { return levy_; }
  AtomMask domain() const { return domain_; }
  bool in_domain(std::size_t k) const { return has_atom(domain_, k); }
  JumpSeminormFamily jump_seminorms() const { return JumpSeminormFamily(q_); }

  // Throws DomainError if A is not in the ring of this measure.
  void require_ring(const RingSet& a) const;
  // E|M((s,t],A)(phi)|^2 = (t-s)[Q(phi)^2 1{0 in A} + sum_{k in A} c_k u_k[phi]^2]
  double second_moment(const RingSet& a, const TestFunction& phi, double s, double t) const;
  double wiener_form(const TestFunction& phi, const TestFunction& vphi) const;

  MvmSpec restricted(AtomMask domain) const;

 private:
  Matrix q_;
  Matrix q_sqrt_;
  bool has_wiener_ = false;
  LevyMeasure levy_;
  AtomMask domain_ = 0;
};

struct Jump {
  double time = 0.0;
  std::size_t atom = 0;
};

// One realization of the Wiener part on the grid plus every jump of every atom.
class NoisePath {
 public:
  NoisePath(std::shared_ptr<const TimeGrid> grid, Matrix wiener, std::vector<Jump> jumps, std::uint64_t seed,
            std::uint64_t path_id);

  const TimeGrid& grid() const { return *grid_; }
  std::shared_ptr<const TimeGrid> grid_ptr() const { return grid_; }
  std::size_t dim() const { return static_cast<std::size_t>(w_.rows()); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t path_id() const { return path_id_; }

  // W at grid point k (column k, k = 0..K)
  auto wiener(std::size_t k) const { return w_.col(static_cast<Eigen::Index>(k)); }
  Vector increment(std::size_t k) const { return w_.col(static_cast<Eigen::Index>(k + 1)) - w_.col(static_cast<Eigen::Index>(k)); }
  const Matrix& wiener_matrix() const { return w_; }

  const std::vector<Jump>& jumps() const { return jumps_; }
  // Jumps with s < time <= t.
  std::span<const Jump> jumps_in(double s, double t) const;
  // Index of the first jump with time > t.
  std::size_t jumps_upto(double t) const;
  std::optional<double> first_jump_time(AtomMask atoms) const;

  // Same realization observed on every `factor`-th grid point.
  NoisePath coarsen(std::size_t factor) const;

  friend bool operator==(const NoisePath& a, const NoisePath& b);

 private:
  std::shared_ptr<const TimeGrid> grid_;
  Matrix w_;
  std::vector<Jump> jumps_;
  std::uint64_t seed_;
  std::uint64_t path_id_;
};

// Stream family lets independent measures share (seed, path_id).
NoisePath simulate_path(const MvmSpec& spec, std::shared_ptr<const TimeGrid> grid, std::uint64_t seed,
                        std::uint64_t path_id, std::uint32_t stream_family = 0);

// M((s,t],A)(phi). s and t must be grid points when 0 is in A.
double mvm_evaluate(const MvmSpec& spec, const NoisePath& path, double s, double t, const RingSet& a,
                    const TestFunction& phi);

// Jump sum over (0,t] minus its compensator, atoms in A only.
double compensated_poisson_integral(const MvmSpec& spec, const NoisePath& path, double t, AtomMask a,
                                    const TestFunction& phi);

// M = M1 + M2 for independent measures: atoms of M2 are re-indexed after those of M1.
struct SumMvm {
  MvmSpec spec;
  std::size_t offset;

  RingSet embed_first(const RingSet& a) const { return a; }
  RingSet embed_second(const RingSet& a) const { return {a.zero, a.atoms << offset}; }
};

SumMvm sum_mvm(const MvmSpec& spec1, const MvmSpec& spec2);
NoisePath merge_paths(const SumMvm& sum, const NoisePath& p1, const NoisePath& p2);

struct LevyTriplet {
  DualVector drift;
  MvmSpec noise;
  unsigned small_ball_level = 0;
  double small_ball_radius = 1.0;

  // Atoms with rho'(u) <= radius.
  AtomMask small_atoms(const SeminormFamily& family) const;
};

// t*m + W_t + compensated small jumps + large jumps, at grid point k.
DualVector levy_path_value(const LevyTriplet& triplet, const SeminormFamily& family, const NoisePath& path,
                           std::size_t k);

}  // namespace nucspde
