#include "nucspde/space.hpp"

#include <cmath>

namespace nucspde {

double pairing(const DualVector& f, const TestFunction& phi) {
  if (f.dim() != phi.dim()) throw DimensionError("pairing: dimension mismatch");
  return f.coeffs().dot(phi.coeffs());
}

SeminormFamily::SeminormFamily(std::size_t dim, double exponent)
    : SeminormFamily(dim, [exponent](unsigned n, std::size_t j) {
        return std::pow(1.0 + static_cast<double>(j), exponent * n);
      }) {}

SeminormFamily::SeminormFamily(std::size_t dim, WeightRule rule) : dim_(dim), rule_(std::move(rule)) {
  if (dim_ == 0) throw DimensionError("seminorm family needs dimension >= 1");
  if (!rule_) throw DomainError("seminorm family needs a weight rule");
}

double SeminormFamily::weight(unsigned level, std::size_t j) const {
  if (j >= dim_) throw DimensionError("weight index out of range");
  double w = rule_(level, j);
  if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weights must be positive and finite");
  return w;
}

Vector SeminormFamily::weights(unsigned level) const {
  Vector w(static_cast<Eigen::Index>(dim_));
  for (std::size_t j = 0; j < dim_; ++j) w(static_cast<Eigen::Index>(j)) = weight(level, j);
  return w;
}

void SeminormFamily::check_monotone(unsigned max_level) const {
  for (unsigned n = 0; n < max_level; ++n)
    for (std::size_t j = 0; j < dim_; ++j)
      if (weight(n, j) > weight(n + 1, j))
        throw DomainError("weights are not monotone in the level at j=" + std::to_string(j) +
                          ", n=" + std::to_string(n));
}

TestFunction SeminormFamily::orthonormal_basis(unsigned level, std::size_t j) const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
  v(static_cast<Eigen::Index>(j)) = 1.0 / std::sqrt(weight(level, j));
  return TestFunction(std::move(v));
}

double seminorm(const SeminormFamily& family, unsigned level, const TestFunction& phi) {
  if (phi.dim() != family.dim()) throw DimensionError("seminorm: dimension mismatch");
  return std::sqrt((family.weights(level).array() * phi.coeffs().array().square()).sum());
}

double dual_seminorm(const SeminormFamily& family, unsigned level, const DualVector& f) {
  if (f.dim() != family.dim()) throw DimensionError("dual_seminorm: dimension mismatch");
  return std::sqrt((f.coeffs().array().square() / family.weights(level).array()).sum());
}

double hs_embedding_norm(const SeminormFamily& family, unsigned level) {
  return std::sqrt((family.weights(level).array() / family.weights(level + 1).array()).sum());
}

Matrix psd_sqrt(const Matrix& q, const std::string& what) {
  if (q.rows() != q.cols()) throw DimensionError(what + ": matrix must be square");
  if (!q.allFinite()) throw DomainError(what + ": matrix must be finite");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError(what + ": matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  Vector ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -1e-12 * scale)
    throw DomainError(what + ": matrix must be positive semidefinite");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

JumpSeminormFamily::JumpSeminormFamily(Matrix q) : q_(std::move(q)) {
  psd_sqrt(q_, "jump seminorm covariance");
}

double JumpSeminormFamily::bilinear(const DualVector* jump, const TestFunction& phi,
                                    const TestFunction& vphi) const {
  if (phi.dim() != dim() || vphi.dim() != dim()) throw DimensionError("jump seminorm: dimension mismatch");
  if (jump == nullptr) return phi.coeffs().dot(q_ * vphi.coeffs());
  return pairing(*jump, phi) * pairing(*jump, vphi);
}

double JumpSeminormFamily::value(const DualVector* jump, const TestFunction& phi) const {
  return std::sqrt(std::max(0.0, bilinear(jump, phi, phi)));
}

}  // namespace nucspde
