#include "stablescale/drift_family.hpp"

#include <algorithm>

#include "stablescale/errors.hpp"

namespace stablescale {

namespace {
// L2(0, pi) norm of the constant function 1; bounds the H-norm of a constant
// nodal forcing after projection.
const double kUnitNorm = std::sqrt(std::numbers::pi);
}  // namespace

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::Affine: return "affine";
    case DriftKind::SinusoidalTime: return "sinusoidal_time";
    case DriftKind::SaturatingNonlinear: return "saturating_nonlinear";
    case DriftKind::ExponentialRelaxation: return "exponential_relaxation";
  }
  return "unknown";
}

DriftKind parse_drift_kind(const std::string& name) {
  if (name == "affine") return DriftKind::Affine;
  if (name == "sinusoidal_time") return DriftKind::SinusoidalTime;
  if (name == "saturating_nonlinear") return DriftKind::SaturatingNonlinear;
  if (name == "exponential_relaxation") return DriftKind::ExponentialRelaxation;
  throw ConfigurationError("unknown drift kind '" + name + "'");
}

DriftFamily& DriftFamily::with_tight_constants() {
  lipschitz_x = std::abs(coeff_x);
  lipschitz_y = std::abs(coeff_y);
  growth = std::max(std::abs(offset) + std::abs(amplitude) + std::abs(coeff_x), std::abs(coeff_y));
  return *this;
}

bool DriftFamily::time_independent() const {
  if (amplitude == 0.0) return true;
  switch (kind) {
    case DriftKind::Affine: return true;
    case DriftKind::ExponentialRelaxation: return false;
    case DriftKind::SinusoidalTime:
    case DriftKind::SaturatingNonlinear: return !period.has_value();
  }
  return true;
}

std::optional<DriftFamily> DriftFamily::averaged_target() const {
  DriftFamily target = *this;
  target.amplitude = 0.0;
  target.period.reset();
  if (kind != DriftKind::SaturatingNonlinear) target.kind = DriftKind::Affine;
  return target;
}

double DriftFamily::averaging_profile(double horizon) const {
  if (time_independent()) return 0.0;
  const double amp = std::abs(amplitude) * kUnitNorm;
  if (kind == DriftKind::ExponentialRelaxation) {
    // sup over windows is attained at t = 0.
    if (horizon <= 0.0) return amp;
    return amp * (-std::expm1(-rate * horizon)) / (rate * horizon);
  }
  const double tau = period->to_double();
  if (horizon <= 0.0) return amp;
  return amp * std::min(1.0, tau / (std::numbers::pi * horizon));
}

std::optional<DriftFamily> DriftFamily::pointwise_target() const {
  if (time_independent() || kind == DriftKind::ExponentialRelaxation) {
    return averaged_target();
  }
  return std::nullopt;
}

double DriftFamily::pointwise_profile(double t) const {
  if (time_independent()) return 0.0;
  if (kind == DriftKind::ExponentialRelaxation) {
    return std::abs(amplitude) * kUnitNorm * std::exp(-rate * std::abs(t));
  }
  throw ConfigurationError("pointwise_profile: periodic drift has no decaying profile");
}

}  // namespace stablescale
