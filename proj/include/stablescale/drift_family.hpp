#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "stablescale/rational.hpp"

namespace stablescale {

enum class DriftKind {
  Affine,                 ///< offset + cx a + cy b
  SinusoidalTime,         ///< affine plus amplitude sin(2 pi t / period + phase)
  SaturatingNonlinear,    ///< offset + cx atan(a) + cy atan(b), optional sinusoid
  ExponentialRelaxation,  ///< affine plus amplitude e^{-rate |t|}
};

std::string to_string(DriftKind kind);
DriftKind parse_drift_kind(const std::string& name);

/// Scalar function f(t, a, b) lifted pointwise (Nemytskii) to fields, drawn
/// from a closed registry so that Lipschitz and growth constants are known.
struct DriftFamily {
  DriftKind kind = DriftKind::Affine;
  double offset = 0.0;
  double coeff_x = 0.0;
  double coeff_y = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
  double rate = 1.0;
  std::optional<Rational> period;

  double lipschitz_x = 0.0;
  double lipschitz_y = 0.0;
  double growth = 0.0;

  /// Fills the declared constants with the smallest values the coefficients allow.
  DriftFamily& with_tight_constants();

  bool saturating() const { return kind == DriftKind::SaturatingNonlinear; }
  bool time_independent() const;
  bool affine() const { return kind != DriftKind::SaturatingNonlinear; }
  bool periodic() const { return period.has_value() && !time_independent(); }
  bool depends_on_y() const { return coeff_y != 0.0; }

  double time_term(double t) const {
    switch (kind) {
      case DriftKind::Affine:
        return 0.0;
      case DriftKind::ExponentialRelaxation:
        return amplitude * std::exp(-rate * std::abs(t));
      case DriftKind::SinusoidalTime:
      case DriftKind::SaturatingNonlinear: {
        if (!period || amplitude == 0.0) return 0.0;
        const double tau = period->to_double();
        const double cycles = t / tau;
        return amplitude *
               std::sin(2.0 * std::numbers::pi * (cycles - std::floor(cycles)) + phase);
      }
    }
    return 0.0;
  }

  /// Pointwise evaluation on nodal arrays of equal shape.
  template <typename DerivedA, typename DerivedB>
  Eigen::ArrayXXd evaluate(double t, const Eigen::ArrayBase<DerivedA>& a,
                           const Eigen::ArrayBase<DerivedB>& b) const {
    const double constant = offset + time_term(t);
    if (saturating()) {
      return constant + coeff_x * a.atan() + coeff_y * b.atan();
    }
    return constant + coeff_x * a + coeff_y * b;
  }

  double evaluate(double t, double a, double b) const {
    const double constant = offset + time_term(t);
    if (saturating()) return constant + coeff_x * std::atan(a) + coeff_y * std::atan(b);
    return constant + coeff_x * a + coeff_y * b;
  }

  /// Time-independent F-tilde with sup_t |(1/T) int_t^{t+T} (F - F~)| <=
  /// averaging_profile(T) (1 + |x| + |y|), when such a target exists.
  std::optional<DriftFamily> averaged_target() const;
  double averaging_profile(double horizon) const;

  /// Time-independent G-tilde with |G(T) - G~| <= pointwise_profile(T)
  /// (1 + |x| + |y|) and pointwise_profile -> 0, when such a target exists.
  std::optional<DriftFamily> pointwise_target() const;
  double pointwise_profile(double t) const;
};

}  // namespace stablescale
