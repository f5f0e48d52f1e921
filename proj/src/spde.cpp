#include "nucspde/spde.hpp"

#include "nucspde/quadrature.hpp"
#include "nucspde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nucspde {

namespace {

// Integral of q_{u}(phi)^2 against delta_0 + nu on the domain.
double mu_square_integral(const MvmSpec& spec, const std::function<TestFunction(const MarkView&)>& f) {
  double total = 0.0;
  if (spec.has_wiener()) {
    const TestFunction v = f(MarkView::wiener_mark());
    total += spec.wiener_form(v, v);
  }
  const auto& levy = spec.levy();
  for (std::size_t a = 0; a < levy.size(); ++a) {
    if (!spec.in_domain(a)) continue;
    const double p = pairing(levy.atom(a).point, f(MarkView{a, &levy.atom(a).point}));
    total += levy.atom(a).rate * p * p;
  }
  return total;
}

double ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

// Largest k with t_k < tau.
std::size_t step_of(const TimeGrid& grid, double tau) {
  const auto& t = grid.times();
  auto it = std::lower_bound(t.begin(), t.end(), tau);
  return static_cast<std::size_t>(it - t.begin()) - 1;
}

double sup_square(const Envelope& e, const std::vector<TestFunction>& k_set, double r) {
  double m = 0.0;
  for (const auto& psi : k_set) {
    const double v = e.value(psi, r);
    m = std::max(m, v * v);
  }
  return m;
}

double envelope_integral(const Envelope& e, const std::vector<TestFunction>& k_set, double T) {
  if (!e.value) return 0.0;
  if (e.time_homogeneous) return T * sup_square(e, k_set, 0.0);
  return integrate_adaptive([&](double r) { return sup_square(e, k_set, r); }, 0.0, T, 1e-12, 16);
}

}  // namespace

Vector apply_noise(const Coefficients& coeffs, double r, const MarkView& m, const DualVector& g, const Vector& f) {
  if (coeffs.noise_apply) return coeffs.noise_apply(r, m, g, f);
  return coeffs.noise(r, m, g) * f;
}

Coefficients with_linear_drift(Coefficients base, double beta, const DualVector& c) {
  if (c.dim() != base.dim_psi) throw DimensionError("linear drift: offset dimension mismatch");
  base.drift = [beta, c](double, const DualVector& g) { return DualVector(beta * g.coeffs() + c.coeffs()); };
  base.a = {[beta, c](const TestFunction& psi, double) { return std::max(std::abs(beta), std::abs(pairing(c, psi))); },
            true};
  return base;
}

Coefficients with_affine_noise(Coefficients base, const Matrix& sigma_matrix, double sigma, const TestFunction& phi0,
                               const MvmSpec& spec) {
  if (static_cast<std::size_t>(sigma_matrix.rows()) != base.dim_psi ||
      static_cast<std::size_t>(sigma_matrix.cols()) != base.dim_phi || phi0.dim() != base.dim_phi ||
      spec.dim() != base.dim_phi)
    throw DimensionError("affine noise: shape mismatch");
  base.noise = [sigma_matrix, sigma, phi0](double, const MarkView&, const DualVector& g) -> Matrix {
    return sigma_matrix + sigma * g.coeffs() * phi0.coeffs().transpose();
  };
  base.mark_independent = true;
  base.noise_apply = [sigma_matrix, sigma, phi0](double, const MarkView&, const DualVector& g, const Vector& f) -> Vector {
    return sigma_matrix * f + (sigma * phi0.coeffs().dot(f)) * g.coeffs();
  };
  const double phi0_part = std::abs(sigma) * std::sqrt(mu_square_integral(spec, [&](const MarkView&) { return phi0; }));
  base.b = {[sigma_matrix, phi0_part, spec](const TestFunction& psi, double) {
              const TestFunction v(sigma_matrix.transpose() * psi.coeffs());
              return std::max(std::sqrt(mu_square_integral(spec, [&](const MarkView&) { return v; })), phi0_part);
            },
            true};
  return base;
}

Coefficients linear_coefficients(std::size_t dim, double beta, const DualVector& c, const Matrix& sigma_matrix,
                                 double sigma, const TestFunction& phi0, const MvmSpec& spec) {
  Coefficients base;
  base.dim_psi = dim;
  base.dim_phi = spec.dim();
  return with_affine_noise(with_linear_drift(std::move(base), beta, c), sigma_matrix, sigma, phi0, spec);
}

CoefficientCheck check_coefficients(const Coefficients& coeffs, const MvmSpec& spec, const SeminormFamily& family,
                                    unsigned level, double T, std::uint64_t seed, std::size_t samples) {
  if (!coeffs.drift || !coeffs.noise || !coeffs.a.value || !coeffs.b.value)
    throw CoefficientError("coefficients need drift, noise and both envelopes");
  if (coeffs.dim_phi != spec.dim() || family.dim() != coeffs.dim_psi)
    throw DimensionError("coefficient dimensions do not match the noise or the seminorm family");
  Philox4x32 gen(seed, 0, StreamTag::samples);
  std::normal_distribution<double> normal;
  auto random_vector = [&](std::size_t d, double scale) {
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * normal(gen);
    return v;
  };
  std::vector<TestFunction> psis = unit_ball_basis(family, level);
  for (std::size_t i = 0; i < 4; ++i) psis.emplace_back(random_vector(coeffs.dim_psi, 1.0));
  const std::vector<double> times{0.0, 0.5 * T, T};

  CoefficientCheck out;
  for (std::size_t s = 0; s < samples; ++s) {
    const DualVector g1(random_vector(coeffs.dim_psi, 3.0));
    const DualVector g2(random_vector(coeffs.dim_psi, 3.0));
    const double r = times[s % times.size()];
    for (const auto& psi : psis) {
      const double a = coeffs.a.value(psi, r), b = coeffs.b.value(psi, r);
      const double g1p = pairing(g1, psi), dgp = pairing(g1 - g2, psi);
      const double bg = pairing(coeffs.drift(r, g1), psi);
      out.worst_growth_ratio = std::max(out.worst_growth_ratio, ratio(std::abs(bg), a * (1.0 + std::abs(g1p))));
      const double fg = mu_square_integral(
          spec, [&](const MarkView& m) { return TestFunction(coeffs.noise(r, m, g1).transpose() * psi.coeffs()); });
      out.worst_growth_ratio = std::max(out.worst_growth_ratio, ratio(fg, b * b * (1.0 + std::abs(g1p)) * (1.0 + std::abs(g1p))));
      const double db = pairing(coeffs.drift(r, g1) - coeffs.drift(r, g2), psi);
      out.worst_lipschitz_ratio = std::max(out.worst_lipschitz_ratio, ratio(std::abs(db), a * std::abs(dgp)));
      const double df = mu_square_integral(spec, [&](const MarkView& m) {
        return TestFunction((coeffs.noise(r, m, g1) - coeffs.noise(r, m, g2)).transpose() * psi.coeffs());
      });
      out.worst_lipschitz_ratio = std::max(out.worst_lipschitz_ratio, ratio(df, b * b * dgp * dgp));
      ++out.samples;
    }
  }
  return out;
}

std::vector<TestFunction> unit_ball_basis(const SeminormFamily& family, unsigned level) {
  std::vector<TestFunction> k;
  for (std::size_t j = 0; j < family.dim(); ++j) k.push_back(family.orthonormal_basis(level, j));
  return k;
}

ContractionReport contraction_constants(double a_integral, double b_integral, const SemigroupBound& bound, double T,
                                        double damping) {
  if (!(T > 0.0) || damping < 0.0 || a_integral < 0.0 || b_integral < 0.0)
    throw DomainError("contraction constants need T > 0 and nonnegative inputs");
  ContractionReport r;
  r.damping = damping;
  r.horizon = T;
  r.a_integral = a_integral;
  r.b_integral = b_integral;
  r.bound = bound;
  const double growth = bound.M * bound.M * std::exp(2.0 * bound.theta * T);
  const double i1 = damping > 0.0 ? -std::expm1(-damping * T) / damping : T;
  const double i2 = damping > 0.0 ? -std::expm1(-2.0 * damping * T) / (2.0 * damping) : T;
  r.c1 = growth * a_integral * i1;
  r.c2 = growth * std::sqrt(b_integral) * std::sqrt(i2);
  r.combined = std::sqrt(2.0 * r.c1 + 2.0 * r.c2);
  return r;
}

ContractionReport contraction_constants(const Coefficients& coeffs, const std::vector<TestFunction>& k_set,
                                        const SemigroupBound& bound, double T, double damping) {
  return contraction_constants(envelope_integral(coeffs.a, k_set, T), envelope_integral(coeffs.b, k_set, T), bound,
                               T, damping);
}

double auto_damping(const Coefficients& coeffs, const std::vector<TestFunction>& k_set, const SemigroupBound& bound,
                    double T, double target) {
  const double ai = envelope_integral(coeffs.a, k_set, T), bi = envelope_integral(coeffs.b, k_set, T);
  auto c = [&](double v) { return contraction_constants(ai, bi, bound, T, v).combined; };
  if (c(0.0) < target) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (c(hi) >= target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw DomainError("no damping reaches the contraction target");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (c(mid) < target ? hi : lo) = mid;
  }
  return hi;
}

MildSolver::MildSolver(Coefficients coeffs, DiagonalSemigroup semigroup, MvmSpec spec, SeminormFamily family,
                       PicardOptions options, double T, std::uint64_t check_seed)
    : coeffs_(std::move(coeffs)),
      semigroup_(std::move(semigroup)),
      spec_(std::move(spec)),
      family_(std::move(family)),
      options_(options) {
  if (semigroup_.dim() != coeffs_.dim_psi) throw DimensionError("semigroup and coefficient dimensions differ");
  check_ = check_coefficients(coeffs_, spec_, family_, options_.norm_level, T, check_seed);
  if (!check_.passed())
    throw CoefficientError("coefficients violate the sampled growth/Lipschitz bounds (growth ratio " +
                           std::to_string(check_.worst_growth_ratio) + ", Lipschitz ratio " +
                           std::to_string(check_.worst_lipschitz_ratio) + ")");
  std::vector<double> grid(33);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = T * static_cast<double>(i) / 32.0;
  const SemigroupBound bound = certify_bound(semigroup_, family_, options_.norm_level, grid);
  const auto k_set = unit_ball_basis(family_, options_.norm_level);
  damping_ = options_.damping ? *options_.damping : auto_damping(coeffs_, k_set, bound, T);
  report_ = contraction_constants(coeffs_, k_set, bound, T, damping_);
  compensator_ = Vector::Zero(static_cast<Eigen::Index>(spec_.dim()));
  for (std::size_t a = 0; a < spec_.levy().size(); ++a)
    if (spec_.in_domain(a)) compensator_ += spec_.levy().atom(a).rate * spec_.levy().atom(a).point.coeffs();
}

MildSolver::GridFactors MildSolver::grid_factors(const DualVector& z0, const TimeGrid& grid) const {
  const std::size_t K = grid.steps();
  GridFactors f{Matrix(static_cast<Eigen::Index>(coeffs_.dim_psi), static_cast<Eigen::Index>(K)),
                Matrix(static_cast<Eigen::Index>(coeffs_.dim_psi), static_cast<Eigen::Index>(K))};
  for (std::size_t k = 0; k < K; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    if (k > 0 && grid.dt(k) == grid.dt(k - 1))
      f.step.col(c) = f.step.col(c - 1);
    else
      f.step.col(c) = semigroup_.factors(grid.dt(k));
    f.from0.col(c) = semigroup_.factors(grid.time(k + 1)).cwiseProduct(z0.coeffs());
  }
  return f;
}

Matrix MildSolver::apply_map(const Matrix& x, const DualVector& z0, const NoisePath& path) const {
  return apply_map(x, z0, path, grid_factors(z0, path.grid()));
}

Matrix MildSolver::apply_map(const Matrix& x, const DualVector& z0, const NoisePath& path, const GridFactors& f) const {
  const TimeGrid& grid = path.grid();
  const std::size_t K = grid.steps();
  const auto& levy = spec_.levy();
  const Eigen::Index d = static_cast<Eigen::Index>(coeffs_.dim_psi);
  Matrix out(d, static_cast<Eigen::Index>(K + 1));
  out.col(0) = z0.coeffs();
  Vector y = Vector::Zero(d);
  for (std::size_t k = 0; k < K; ++k) {
    const double t = grid.time(k), dt = grid.dt(k);
    const DualVector g(x.col(static_cast<Eigen::Index>(k)));
    Vector incr = dt * coeffs_.drift(t, g).coeffs();
    if (spec_.has_wiener()) incr += apply_noise(coeffs_, t, MarkView::wiener_mark(), g, path.increment(k));
    if (coeffs_.mark_independent) {
      if (!compensator_.isZero(0.0)) incr -= dt * apply_noise(coeffs_, t, MarkView::wiener_mark(), g, compensator_);
    } else {
      for (std::size_t a = 0; a < levy.size(); ++a)
        if (spec_.in_domain(a))
          incr -= (dt * levy.atom(a).rate) * apply_noise(coeffs_, t, MarkView{a, &levy.atom(a).point}, g, levy.atom(a).point.coeffs());
    }
    y = f.step.col(static_cast<Eigen::Index>(k)).cwiseProduct(y + incr);
    const double t1 = grid.time(k + 1);
    for (const Jump& j : path.jumps_in(t, t1)) {
      if (!spec_.in_domain(j.atom)) continue;
      const auto& u = levy.atom(j.atom).point;
      y += semigroup_.factors(t1 - j.time).cwiseProduct(apply_noise(coeffs_, j.time, MarkView{j.atom, &u}, g, u.coeffs()));
    }
    out.col(static_cast<Eigen::Index>(k + 1)) = f.from0.col(static_cast<Eigen::Index>(k)) + y;
  }
  return out;
}

double MildSolver::distance(const Matrix& x, const Matrix& y, const TimeGrid& grid) const {
  const Vector inv_w = family_.weights(options_.norm_level).cwiseInverse();
  double m = 0.0;
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    const auto diff = x.col(static_cast<Eigen::Index>(k)) - y.col(static_cast<Eigen::Index>(k));
    m = std::max(m, std::exp(-damping_ * grid.time(k)) * diff.cwiseAbs2().dot(inv_w));
  }
  return m;
}

SolutionPath MildSolver::solve(const DualVector& z0, const NoisePath& path) const {
  if (z0.dim() != coeffs_.dim_psi) throw DimensionError("initial condition dimension mismatch");
  if (path.dim() != spec_.dim()) throw DimensionError("noise path dimension mismatch");
  const TimeGrid& grid = path.grid();
  SolutionPath sol;
  sol.grid = path.grid_ptr();
  sol.initial = z0;
  Matrix x(static_cast<Eigen::Index>(coeffs_.dim_psi), static_cast<Eigen::Index>(grid.steps() + 1));
  for (std::size_t k = 0; k <= grid.steps(); ++k)
    x.col(static_cast<Eigen::Index>(k)) = semigroup_.factors(grid.time(k)).cwiseProduct(z0.coeffs());
  const Vector inv_w = family_.weights(options_.norm_level).cwiseInverse();
  const GridFactors factors = grid_factors(z0, grid);
  for (unsigned it = 1; it <= options_.max_iter; ++it) {
    Matrix next = apply_map(x, z0, path, factors);
    const double dist = distance(next, x, grid);
    sol.distance_trace.push_back(dist);
    if (options_.record_profiles) {
      Vector prof(static_cast<Eigen::Index>(grid.steps() + 1));
      for (std::size_t k = 0; k <= grid.steps(); ++k)
        prof(static_cast<Eigen::Index>(k)) =
            (next.col(static_cast<Eigen::Index>(k)) - x.col(static_cast<Eigen::Index>(k))).cwiseAbs2().dot(inv_w);
      sol.profiles.push_back(std::move(prof));
    }
    x = std::move(next);
    if (!std::isfinite(dist))
      throw PicardDivergence("Picard iteration produced a non-finite distance", sol.distance_trace);
    if (it >= options_.min_iter && dist < options_.tol) {
      sol.iterations = it;
      sol.residual = dist;
      sol.states = std::move(x);
      return sol;
    }
  }
  throw PicardDivergence("Picard iteration did not reach tol " + std::to_string(options_.tol) + " within " +
                             std::to_string(options_.max_iter) + " iterations",
                         sol.distance_trace);
}

SolutionPath solve_mild(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                        const SeminormFamily& family, const DualVector& z0, std::shared_ptr<const TimeGrid> grid,
                        std::uint64_t seed, std::uint64_t path_id, const PicardOptions& options) {
  const double T = grid->horizon();
  const NoisePath path = simulate_path(spec, std::move(grid), seed, path_id);
  return MildSolver(coeffs, semigroup, spec, family, options, T, seed).solve(z0, path);
}

OperatorIntegrand convolution_integrand(const OperatorIntegrand& r, const DiagonalSemigroup& semigroup, double t) {
  if (semigroup.dim() != r.rows) throw DimensionError("convolution: semigroup and operator rows differ");
  return {[r, semigroup, t](const Instant& i, const History& h, const MarkView& m) -> Matrix {
            if (!up_to(i, t)) return Matrix::Zero(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(r.cols));
            return semigroup.factors(t - i.time).asDiagonal() * r.eval(i, h, m);
          },
          r.moment, r.rows, r.cols};
}

DualVector stochastic_convolution(const OperatorIntegrand& r, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                                  const NoisePath& path, double t) {
  return integrate_strong(convolution_integrand(r, semigroup, t), spec, path, t);
}

OperatorIntegrand state_noise_integrand(const Coefficients& coeffs, const Matrix& states) {
  return {[noise = coeffs.noise, states](const Instant& i, const History&, const MarkView& m) -> Matrix {
            return noise(i.time, m, DualVector(states.col(static_cast<Eigen::Index>(i.step))));
          },
          MomentClass::square, coeffs.dim_psi, coeffs.dim_phi};
}

DualVector deterministic_convolution(const Coefficients& coeffs, const Matrix& states,
                                     const DiagonalSemigroup& semigroup, const TimeGrid& grid, double t) {
  const std::size_t kt = grid.require_index(t);
  Vector acc = Vector::Zero(static_cast<Eigen::Index>(coeffs.dim_psi));
  for (std::size_t i = 0; i < kt; ++i)
    acc += grid.dt(i) * semigroup.factors(t - grid.time(i)).cwiseProduct(
                            coeffs.drift(grid.time(i), DualVector(states.col(static_cast<Eigen::Index>(i)))).coeffs());
  return DualVector(std::move(acc));
}

double weak_residual(const Matrix& states, const Coefficients& coeffs, const DiagonalSemigroup& semigroup,
                     const MvmSpec& spec, const NoisePath& path, const TestFunction& psi, double t) {
  const TimeGrid& grid = path.grid();
  const std::size_t kt = grid.require_index(t);
  const Vector a_psi = generator_apply(semigroup, psi).coeffs();
  double drift = 0.0;
  for (std::size_t i = 0; i < kt; ++i) {
    const DualVector x(states.col(static_cast<Eigen::Index>(i)));
    drift += grid.dt(i) * (x.coeffs().dot(a_psi) + pairing(coeffs.drift(grid.time(i), x), psi));
  }
  const double stoch = integrate(transpose_apply(state_noise_integrand(coeffs, states), psi), spec, path, t);
  return states.col(static_cast<Eigen::Index>(kt)).dot(psi.coeffs()) - states.col(0).dot(psi.coeffs()) - drift - stoch;
}

std::vector<AtomMask> nested_domains(const LevyMeasure& levy, const NestedDomains& balls) {
  std::vector<AtomMask> out;
  AtomMask acc = 0;
  for (std::size_t n = 1; n <= balls.levels.size(); ++n) {
    for (std::size_t a = 0; a < levy.size(); ++a)
      if (dual_seminorm(balls.family, balls.levels[n - 1], levy.atom(a).point) <= static_cast<double>(n))
        acc |= atom_bit(a);
    out.push_back(acc);
  }
  return out;
}

LevySolver::LevySolver(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const LevyTriplet& triplet,
                       const NestedDomains& balls, const SeminormFamily& family, const PicardOptions& options,
                       double T, std::uint64_t check_seed)
    : triplet_(triplet), coeffs_(coeffs) {
  if (balls.levels.empty()) throw DomainError("Levy localization needs at least one level");
  const auto& levy = triplet.noise.levy();
  domains_ = nested_domains(levy, balls);
  for (std::size_t n = 0; n < domains_.size(); ++n) {
    const AtomMask extra = domains_[n] & ~domains_[0];
    Coefficients cn = coeffs;
    if (extra != 0) {
      auto base_drift = coeffs.drift;
      Vector extra_moment = Vector::Zero(static_cast<Eigen::Index>(levy.dim()));
      for (std::size_t a = 0; a < levy.size(); ++a)
        if (has_atom(extra, a)) extra_moment += levy.atom(a).rate * levy.atom(a).point.coeffs();
      cn.drift = [base_drift, coeffs, levy, extra, extra_moment](double r, const DualVector& g) {
        Vector v = base_drift(r, g).coeffs();
        if (coeffs.mark_independent) {
          v += apply_noise(coeffs, r, MarkView::wiener_mark(), g, extra_moment);
          return DualVector(std::move(v));
        }
        for (std::size_t a = 0; a < levy.size(); ++a)
          if (has_atom(extra, a))
            v += levy.atom(a).rate * apply_noise(coeffs, r, MarkView{a, &levy.atom(a).point}, g, levy.atom(a).point.coeffs());
        return DualVector(std::move(v));
      };
      double root_rates = 0.0;
      for (std::size_t a = 0; a < levy.size(); ++a)
        if (has_atom(extra, a)) root_rates += std::sqrt(levy.atom(a).rate);
      auto a_env = coeffs.a.value;
      auto b_env = coeffs.b.value;
      cn.a = {[a_env, b_env, root_rates](const TestFunction& psi, double r) {
                return a_env(psi, r) + root_rates * b_env(psi, r);
              },
              coeffs.a.time_homogeneous && coeffs.b.time_homogeneous};
    }
    solvers_.emplace_back(std::move(cn), semigroup, triplet.noise.restricted(domains_[n]), family, options, T,
                          check_seed);
  }
}

LevySolution LevySolver::solve(const DualVector& z0, const NoisePath& path) const {
  const TimeGrid& grid = path.grid();
  const std::size_t N = solvers_.size();
  LevySolution out;
  out.domains = domains_;
  for (std::size_t n = 0; n < N; ++n) {
    out.levels.push_back(solvers_[n].solve(z0, path));
    double tau = std::numeric_limits<double>::infinity();
    for (const Jump& j : path.jumps())
      if (!has_atom(domains_[n], j.atom)) {
        tau = j.time;
        break;
      }
    out.stopping_times.push_back(tau);
  }
  out.escaped = out.stopping_times.back() <= grid.horizon();
  out.patched = out.levels.back().states;
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    const double t = grid.time(k);
    for (std::size_t n = 0; n < N; ++n)
      if (t <= out.stopping_times[n]) {
        out.patched.col(static_cast<Eigen::Index>(k)) = out.levels[n].states.col(static_cast<Eigen::Index>(k));
        break;
      }
  }
  for (std::size_t m = 0; m < N; ++m)
    for (std::size_t n = m + 1; n < N; ++n)
      for (std::size_t k = 0; k <= grid.steps() && grid.time(k) <= out.stopping_times[m]; ++k)
        out.coupling_deviation =
            std::max(out.coupling_deviation, (out.levels[n].states.col(static_cast<Eigen::Index>(k)) -
                                              out.levels[m].states.col(static_cast<Eigen::Index>(k)))
                                                 .cwiseAbs()
                                                 .maxCoeff());
  return out;
}

LevySolution solve_levy(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const LevyTriplet& triplet,
                        const NestedDomains& balls, const DualVector& z0, const NoisePath& path,
                        const PicardOptions& options, std::uint64_t check_seed) {
  return LevySolver(coeffs, semigroup, triplet, balls, balls.family, options, path.grid().horizon(), check_seed)
      .solve(z0, path);
}

double levy_weak_residual(const Matrix& states, const Coefficients& coeffs, const DiagonalSemigroup& semigroup,
                          const LevyTriplet& triplet, AtomMask small, const NoisePath& path, const TestFunction& psi,
                          double t) {
  const MvmSpec small_spec = triplet.noise.restricted(small);
  double r = weak_residual(states, coeffs, semigroup, small_spec, path, psi, t);
  const auto& levy = triplet.noise.levy();
  for (const Jump& j : path.jumps_in(0.0, t)) {
    if (has_atom(small, j.atom)) continue;
    const auto& u = levy.atom(j.atom).point;
    const DualVector g(states.col(static_cast<Eigen::Index>(step_of(path.grid(), j.time))));
    r -= pairing(DualVector(apply_noise(coeffs, j.time, MarkView{j.atom, &u}, g, u.coeffs())), psi);
  }
  return r;
}

}  // namespace nucspde
