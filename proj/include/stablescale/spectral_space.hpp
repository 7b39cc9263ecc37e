#pragma once

// Finite sine-basis representation of the state space: coefficient fields,
// diagonal negative-definite operators and their semigroups, and the
// fractional Sobolev norms they induce.

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "stablescale/errors.hpp"

namespace stablescale {

using Index = Eigen::Index;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Coefficients u_k of a field on the first N basis modes. Immutable; every
/// arithmetic operation yields a new field.
template <typename Scalar>
class SpectralField {
 public:
  using Vector = DenseVector<Scalar>;

  SpectralField() = default;

  explicit SpectralField(Vector coeffs) : coeffs_(std::move(coeffs)) {
    if (!coeffs_.allFinite()) {
      throw DomainError("SpectralField: non-finite coefficient");
    }
  }

  static SpectralField Zero(Index dimension) {
    return SpectralField(Vector::Zero(dimension));
  }

  /// Unit field along basis mode `index` (0-based, so index 0 is e_1).
  static SpectralField Basis(Index dimension, Index index, Scalar value = Scalar(1)) {
    if (index < 0 || index >= dimension) {
      throw ConfigurationError("SpectralField::Basis: mode index out of range");
    }
    Vector v = Vector::Zero(dimension);
    v[index] = value;
    return SpectralField(std::move(v));
  }

  Index dimension() const { return coeffs_.size(); }
  const Vector& coeffs() const { return coeffs_; }
  Scalar operator[](Index k) const { return coeffs_[k]; }

  /// Norm of H, i.e. the Euclidean norm of the coefficients.
  Scalar norm() const { return coeffs_.norm(); }

 private:
  Vector coeffs_;
};

template <typename Scalar>
void require_same_dimension(const SpectralField<Scalar>& a,
                            const SpectralField<Scalar>& b, const char* where) {
  if (a.dimension() != b.dimension()) {
    throw ConfigurationError(std::string(where) + ": dimension mismatch (" +
                             std::to_string(a.dimension()) + " vs " +
                             std::to_string(b.dimension()) + ")");
  }
}

template <typename Scalar>
SpectralField<Scalar> operator+(const SpectralField<Scalar>& a,
                                const SpectralField<Scalar>& b) {
  require_same_dimension(a, b, "SpectralField::operator+");
  return SpectralField<Scalar>(a.coeffs() + b.coeffs());
}

template <typename Scalar>
SpectralField<Scalar> operator-(const SpectralField<Scalar>& a,
                                const SpectralField<Scalar>& b) {
  require_same_dimension(a, b, "SpectralField::operator-");
  return SpectralField<Scalar>(a.coeffs() - b.coeffs());
}

template <typename Scalar>
SpectralField<Scalar> operator*(Scalar c, const SpectralField<Scalar>& a) {
  return SpectralField<Scalar>(c * a.coeffs());
}

enum class OperatorLabel { A, B };

/// Self-adjoint operator diagonal in the sine basis, A e_k = -lambda_k e_k.
/// Stores the positive, nondecreasing eigenvalue magnitudes lambda_k.
template <typename Scalar>
class DiagonalOperator {
 public:
  using Vector = DenseVector<Scalar>;

  DiagonalOperator() = default;

  DiagonalOperator(Vector eigenvalues, OperatorLabel label)
      : eigenvalues_(std::move(eigenvalues)), label_(label) {
    if (eigenvalues_.size() == 0) {
      throw ConfigurationError("DiagonalOperator: empty eigenvalue list");
    }
    if (!eigenvalues_.allFinite() || !(eigenvalues_[0] > Scalar(0))) {
      throw ConfigurationError("DiagonalOperator: eigenvalues must be positive and finite");
    }
    for (Index k = 1; k < eigenvalues_.size(); ++k) {
      if (eigenvalues_[k] < eigenvalues_[k - 1]) {
        throw ConfigurationError("DiagonalOperator: eigenvalues must be nondecreasing");
      }
    }
  }

  /// lambda_k = scale * k^power for k = 1..dimension.
  static DiagonalOperator PowerLaw(Index dimension, Scalar scale, Scalar power,
                                   OperatorLabel label) {
    Vector v(dimension);
    for (Index k = 0; k < dimension; ++k) {
      v[k] = scale * std::pow(Scalar(k + 1), power);
    }
    return DiagonalOperator(std::move(v), label);
  }

  Index dimension() const { return eigenvalues_.size(); }
  const Vector& eigenvalues() const { return eigenvalues_; }
  Scalar first() const { return eigenvalues_[0]; }
  OperatorLabel label() const { return label_; }

 private:
  Vector eigenvalues_;
  OperatorLabel label_ = OperatorLabel::A;
};

struct SobolevIndex {
  double s = 0.0;

  constexpr SobolevIndex() = default;
  explicit SobolevIndex(double order) : s(order) {
    if (!std::isfinite(order)) throw DomainError("SobolevIndex: order must be finite");
  }
};

template <typename Scalar>
void require_same_dimension(const SpectralField<Scalar>& u,
                            const DiagonalOperator<Scalar>& op, const char* where) {
  if (u.dimension() != op.dimension()) {
    throw ConfigurationError(std::string(where) + ": field has dimension " +
                             std::to_string(u.dimension()) + ", operator has " +
                             std::to_string(op.dimension()));
  }
}

/// ||u||_s = (sum_k lambda_k^s u_k^2)^{1/2}.
template <typename Scalar>
Scalar sobolev_norm(const SpectralField<Scalar>& u, const DiagonalOperator<Scalar>& op,
                    SobolevIndex s) {
  require_same_dimension(u, op, "sobolev_norm");
  if (s.s == 0.0) return u.norm();
  const auto weights = op.eigenvalues().array().pow(Scalar(s.s));
  return std::sqrt((weights * u.coeffs().array().square()).sum());
}

/// Per-mode factors e^{-lambda_k t}.
template <typename Scalar>
DenseVector<Scalar> semigroup_factors(const DiagonalOperator<Scalar>& op, Scalar t) {
  if (!(t >= Scalar(0))) throw DomainError("semigroup: time must be nonnegative");
  return (-t * op.eigenvalues().array()).exp().matrix();
}

/// Per-mode factors (1 - e^{-lambda_k t}) / lambda_k, the exact integral of
/// the semigroup over [0, t].
template <typename Scalar>
DenseVector<Scalar> semigroup_integral_factors(const DiagonalOperator<Scalar>& op, Scalar t) {
  if (!(t >= Scalar(0))) throw DomainError("semigroup: time must be nonnegative");
  DenseVector<Scalar> out(op.dimension());
  for (Index k = 0; k < op.dimension(); ++k) {
    const Scalar lambda = op.eigenvalues()[k];
    out[k] = -std::expm1(-lambda * t) / lambda;
  }
  return out;
}

template <typename Scalar>
SpectralField<Scalar> semigroup_apply(const DiagonalOperator<Scalar>& op, Scalar t,
                                      const SpectralField<Scalar>& u) {
  require_same_dimension(u, op, "semigroup_apply");
  return SpectralField<Scalar>(
      (semigroup_factors(op, t).array() * u.coeffs().array()).matrix());
}

/// Sharp constant C with v^r e^{-v} <= C e^{-v/2} for all v > 0,
/// r = (sigma2 - sigma1)/2, i.e. sup_v v^r e^{-v/2} = (2r)^r e^{-r}.
inline double smoothing_constant(double sigma1, double sigma2) {
  if (!(sigma1 < sigma2)) {
    throw DomainError("smoothing_constant: requires sigma1 < sigma2");
  }
  const double r = 0.5 * (sigma2 - sigma1);
  return std::exp(r * std::log(2.0 * r) - r);
}

using Field = SpectralField<double>;
using Operator = DiagonalOperator<double>;

}  // namespace stablescale
