#include "nucspde/noise.hpp"

#include "nucspde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nucspde {

LevyMeasure::LevyMeasure(std::size_t dim, std::vector<LevyAtom> atoms) : dim_(dim), atoms_(std::move(atoms)) {
  if (atoms_.size() > kMaxAtoms) throw DomainError("at most 64 Levy atoms are supported");
  for (const auto& a : atoms_) {
    if (a.point.dim() != dim_) throw DimensionError("Levy atom dimension mismatch");
    if (!(a.rate > 0.0) || !std::isfinite(a.rate)) throw DomainError("Levy atom rates must be positive and finite");
    if (a.point.coeffs().isZero(0.0)) throw DomainError("Levy measure must not charge the origin");
  }
}

double LevyMeasure::total_rate(AtomMask mask) const {
  double s = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k)
    if (has_atom(mask, k)) s += atoms_[k].rate;
  return s;
}

double LevyMeasure::second_moment(AtomMask mask, const TestFunction& phi) const {
  double s = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k)
    if (has_atom(mask, k)) {
      const double v = pairing(atoms_[k].point, phi);
      s += atoms_[k].rate * v * v;
    }
  return s;
}

double LevyMeasure::first_moment(AtomMask mask, const TestFunction& phi) const {
  double s = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k)
    if (has_atom(mask, k)) s += atoms_[k].rate * pairing(atoms_[k].point, phi);
  return s;
}

namespace {

double inverse_normal_cdf(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<LevyAtom> atomize_radial_gaussian(const DualVector& direction, double intensity, double scale,
                                              std::size_t count) {
  if (count == 0 || !(intensity > 0.0) || !(scale > 0.0)) throw DomainError("radial component needs positive parameters");
  std::vector<LevyAtom> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = scale * inverse_normal_cdf(0.5 * (1.0 + q));
    out.push_back({r * direction, intensity / static_cast<double>(count)});
  }
  return out;
}

TimeGrid::TimeGrid(std::vector<double> times) : t_(std::move(times)) {
  if (t_.size() < 2) throw DomainError("time grid needs at least one step");
  if (t_.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t k = 1; k < t_.size(); ++k)
    if (!(t_[k] > t_[k - 1]) || !std::isfinite(t_[k])) throw DomainError("time grid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(double T, std::size_t steps) {
  if (!(T > 0.0) || steps == 0) throw DomainError("uniform grid needs T > 0 and steps >= 1");
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(steps);
  t[steps] = T;
  return TimeGrid(std::move(t));
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
  const double slack = 1e-12 * std::max(1.0, horizon());
  auto it = std::lower_bound(t_.begin(), t_.end(), t - slack);
  if (it != t_.end() && std::abs(*it - t) <= slack) return static_cast<std::size_t>(it - t_.begin());
  return std::nullopt;
}

std::size_t TimeGrid::require_index(double t) const {
  auto k = index_of(t);
  if (!k) throw DomainError("time " + std::to_string(t) + " is not a grid point");
  return *k;
}

std::size_t TimeGrid::floor_index(double t) const {
  if (t < 0.0) throw DomainError("negative time");
  if (auto k = index_of(t)) return *k;
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  return static_cast<std::size_t>(it - t_.begin()) - 1;
}

MvmSpec::MvmSpec(Matrix q, LevyMeasure levy) : MvmSpec(std::move(q), levy, all_atoms(levy.size())) {}

MvmSpec::MvmSpec(Matrix q, LevyMeasure levy, AtomMask domain)
    : q_(std::move(q)), levy_(std::move(levy)), domain_(domain & all_atoms(levy_.size())) {
  q_sqrt_ = psd_sqrt(q_, "Wiener covariance");
  has_wiener_ = !q_.isZero(0.0);
  if (levy_.size() > 0 && levy_.dim() != dim()) throw DimensionError("Levy measure and covariance dimensions differ");
}

void MvmSpec::require_ring(const RingSet& a) const {
  if ((a.atoms & ~domain_) != 0) throw DomainError("set is not in the ring of the measure");
}

double MvmSpec::wiener_form(const TestFunction& phi, const TestFunction& vphi) const {
  return phi.coeffs().dot(q_ * vphi.coeffs());
}

double MvmSpec::second_moment(const RingSet& a, const TestFunction& phi, double s, double t) const {
  require_ring(a);
  double m = levy_.second_moment(a.atoms, phi);
  if (a.zero) m += wiener_form(phi, phi);
  return (t - s) * m;
}

MvmSpec MvmSpec::restricted(AtomMask domain) const { return MvmSpec(q_, levy_, domain); }

NoisePath::NoisePath(std::shared_ptr<const TimeGrid> grid, Matrix wiener, std::vector<Jump> jumps,
                     std::uint64_t seed, std::uint64_t path_id)
    : grid_(std::move(grid)), w_(std::move(wiener)), jumps_(std::move(jumps)), seed_(seed), path_id_(path_id) {
  if (static_cast<std::size_t>(w_.cols()) != grid_->steps() + 1) throw DimensionError("Wiener path length mismatch");
}

std::span<const Jump> NoisePath::jumps_in(double s, double t) const {
  auto cmp = [](const Jump& j, double x) { return j.time <= x; };
  auto lo = std::lower_bound(jumps_.begin(), jumps_.end(), s, cmp);
  auto hi = std::lower_bound(lo, jumps_.end(), t, cmp);
  return {lo, hi};
}

std::size_t NoisePath::jumps_upto(double t) const {
  auto cmp = [](const Jump& j, double x) { return j.time <= x; };
  return static_cast<std::size_t>(std::lower_bound(jumps_.begin(), jumps_.end(), t, cmp) - jumps_.begin());
}

std::optional<double> NoisePath::first_jump_time(AtomMask atoms) const {
  for (const auto& j : jumps_)
    if (has_atom(atoms, j.atom)) return j.time;
  return std::nullopt;
}

NoisePath NoisePath::coarsen(std::size_t factor) const {
  const std::size_t K = grid_->steps();
  if (factor == 0 || K % factor != 0) throw DomainError("coarsening factor must divide the step count");
  std::vector<double> t(K / factor + 1);
  Matrix w(w_.rows(), static_cast<Eigen::Index>(K / factor + 1));
  for (std::size_t k = 0; k <= K / factor; ++k) {
    t[k] = grid_->time(k * factor);
    w.col(static_cast<Eigen::Index>(k)) = w_.col(static_cast<Eigen::Index>(k * factor));
  }
  return NoisePath(std::make_shared<const TimeGrid>(std::move(t)), std::move(w), jumps_, seed_, path_id_);
}

bool operator==(const NoisePath& a, const NoisePath& b) {
  if (a.grid().times() != b.grid().times()) return false;
  if (a.w_.rows() != b.w_.rows() || !(a.w_.array() == b.w_.array()).all()) return false;
  if (a.jumps_.size() != b.jumps_.size()) return false;
  for (std::size_t i = 0; i < a.jumps_.size(); ++i)
    if (a.jumps_[i].time != b.jumps_[i].time || a.jumps_[i].atom != b.jumps_[i].atom) return false;
  return true;
}

NoisePath simulate_path(const MvmSpec& spec, std::shared_ptr<const TimeGrid> grid, std::uint64_t seed,
                        std::uint64_t path_id, std::uint32_t stream_family) {
  const std::size_t d = spec.dim();
  const std::size_t K = grid->steps();
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(K + 1));
  if (spec.has_wiener()) {
    Philox4x32 gen(seed, path_id, StreamTag::wiener, stream_family);
    std::normal_distribution<double> normal;
    Vector z(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < K; ++k) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(gen);
      w.col(static_cast<Eigen::Index>(k + 1)) =
          w.col(static_cast<Eigen::Index>(k)) + std::sqrt(grid->dt(k)) * (spec.covariance_sqrt() * z);
    }
  }
  std::vector<Jump> jumps;
  const double T = grid->horizon();
  for (std::size_t a = 0; a < spec.levy().size(); ++a) {
    Philox4x32 gen(seed, path_id, StreamTag::jumps, stream_family * kMaxAtoms + static_cast<std::uint32_t>(a));
    std::exponential_distribution<double> wait(spec.levy().atom(a).rate);
    for (double t = wait(gen); t <= T; t += wait(gen)) jumps.push_back({t, a});
  }
  std::sort(jumps.begin(), jumps.end(),
            [](const Jump& x, const Jump& y) { return x.time < y.time || (x.time == y.time && x.atom < y.atom); });
  return NoisePath(std::move(grid), std::move(w), std::move(jumps), seed, path_id);
}

double mvm_evaluate(const MvmSpec& spec, const NoisePath& path, double s, double t, const RingSet& a,
                    const TestFunction& phi) {
  spec.require_ring(a);
  if (phi.dim() != spec.dim()) throw DimensionError("mvm_evaluate: dimension mismatch");
  if (!(0.0 <= s && s <= t && t <= path.grid().horizon() * (1.0 + 1e-12)))
    throw DomainError("mvm_evaluate needs 0 <= s <= t <= T");
  double v = 0.0;
  if (a.zero && spec.has_wiener()) {
    const std::size_t ks = path.grid().require_index(s), kt = path.grid().require_index(t);
    v += (path.wiener(kt) - path.wiener(ks)).dot(phi.coeffs());
  }
  if (a.atoms != 0) {
    for (const Jump& j : path.jumps_in(s, t))
      if (a.contains_atom(j.atom)) v += pairing(spec.levy().atom(j.atom).point, phi);
    v -= (t - s) * spec.levy().first_moment(a.atoms, phi);
  }
  return v;
}

double compensated_poisson_integral(const MvmSpec& spec, const NoisePath& path, double t, AtomMask a,
                                    const TestFunction& phi) {
  return mvm_evaluate(spec, path, 0.0, t, RingSet::of_atoms(a), phi);
}

SumMvm sum_mvm(const MvmSpec& spec1, const MvmSpec& spec2) {
  if (spec1.dim() != spec2.dim()) throw DimensionError("sum_mvm: dimension mismatch");
  const std::size_t n1 = spec1.levy().size();
  if (n1 + spec2.levy().size() > kMaxAtoms) throw DomainError("sum_mvm: too many atoms");
  std::vector<LevyAtom> atoms = spec1.levy().atoms();
  for (const auto& a : spec2.levy().atoms()) atoms.push_back(a);
  LevyMeasure levy(spec1.dim(), std::move(atoms));
  const AtomMask domain = spec1.domain() | (spec2.domain() << n1);
  return SumMvm{MvmSpec(spec1.covariance() + spec2.covariance(), std::move(levy), domain), n1};
}

NoisePath merge_paths(const SumMvm& sum, const NoisePath& p1, const NoisePath& p2) {
  if (p1.grid().times() != p2.grid().times()) throw DomainError("merge_paths: grids differ");
  std::vector<Jump> jumps = p1.jumps();
  for (Jump j : p2.jumps()) jumps.push_back({j.time, j.atom + sum.offset});
  std::sort(jumps.begin(), jumps.end(),
            [](const Jump& x, const Jump& y) { return x.time < y.time || (x.time == y.time && x.atom < y.atom); });
  return NoisePath(p1.grid_ptr(), p1.wiener_matrix() + p2.wiener_matrix(), std::move(jumps), p1.seed(), p1.path_id());
}

AtomMask LevyTriplet::small_atoms(const SeminormFamily& family) const {
  AtomMask m = 0;
  for (std::size_t k = 0; k < noise.levy().size(); ++k)
    if (dual_seminorm(family, small_ball_level, noise.levy().atom(k).point) <= small_ball_radius) m |= atom_bit(k);
  return m;
}

DualVector levy_path_value(const LevyTriplet& triplet, const SeminormFamily& family, const NoisePath& path,
                           std::size_t k) {
  const double t = path.grid().time(k);
  Vector v = t * triplet.drift.coeffs() + path.wiener(k);
  const auto& levy = triplet.noise.levy();
  const AtomMask small = triplet.small_atoms(family);
  for (const Jump& j : path.jumps_in(0.0, t)) v += levy.atom(j.atom).point.coeffs();
  for (std::size_t a = 0; a < levy.size(); ++a)
    if (has_atom(small, a)) v -= t * levy.atom(a).rate * levy.atom(a).point.coeffs();
  return DualVector(std::move(v));
}

}  // namespace nucspde
