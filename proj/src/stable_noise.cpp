#include "stablescale/stable_noise.hpp"

#include <numbers>

namespace stablescale {

NoiseWeights::NoiseWeights(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw ConfigurationError("NoiseWeights: weights must be finite and nonnegative");
  }
}

NoiseWeights NoiseWeights::Constant(Index dimension, double value) {
  return NoiseWeights(Eigen::VectorXd::Constant(dimension, value));
}

NoiseWeights NoiseWeights::PowerLaw(Index dimension, double scale, double power) {
  Eigen::VectorXd w(dimension);
  for (Index k = 0; k < dimension; ++k) w[k] = scale * std::pow(double(k + 1), power);
  return NoiseWeights(std::move(w));
}

std::string to_string(NoiseRole role) {
  switch (role) {
    case NoiseRole::SlowNoiseL: return "slow_L";
    case NoiseRole::FastNoiseZ: return "fast_Z";
    case NoiseRole::FrozenNegativeTimeCopy: return "fast_Z_negative_time";
  }
  return "unknown";
}

UniformPair uniform_pair(const StreamKey& key, std::int64_t step, std::uint32_t lane) {
  const std::uint64_t k = derive_seed(key.seed, static_cast<std::uint64_t>(key.role));
  const auto ustep = static_cast<std::uint64_t>(step);
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(ustep),
                                static_cast<std::uint32_t>(ustep >> 32), lane, key.trajectory};
  const auto out = Philox4x32::generate(
      ctr, {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
  const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
  const std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
  return {open_unit_interval(a), open_unit_interval(b)};
}

double standard_stable_from_uniforms(double alpha, double u1, double u2) {
  const double angle = std::numbers::pi * (u1 - 0.5);
  const double expo = -std::log(u2);
  const double log_mag = ((1.0 - alpha) * std::log(std::cos((1.0 - alpha) * angle) / expo) -
                          std::log(std::cos(angle))) /
                         alpha;
  return std::sin(alpha * angle) * std::exp(log_mag);
}

double sample_standard_symmetric_stable(const StableIndex& idx, NoiseStream& stream) {
  const double s = stream.standard_stable_at(idx, stream.cursor(), 0);
  stream.advance();
  return s;
}

double convolution_scale(double eigenvalue, double weight, double dt, const StableIndex& idx) {
  if (!(eigenvalue > 0.0) || !(dt > 0.0) || !(weight >= 0.0)) {
    throw DomainError("convolution_scale: requires eigenvalue > 0, dt > 0, weight >= 0");
  }
  const double a = idx.value();
  const double rate = a * eigenvalue;
  return weight * std::pow(-std::expm1(-rate * dt) / rate, 1.0 / a);
}

double rescaled_fast_convolution_scale(double eigenvalue, double weight, double dt, double eps,
                                       const StableIndex& idx) {
  if (!(eps > 0.0)) throw DomainError("rescaled_fast_convolution_scale: eps must be positive");
  return convolution_scale(eigenvalue, weight, dt / eps, idx);
}

Eigen::VectorXd convolution_scales(const Operator& op, const NoiseWeights& weights, double dt,
                                   const StableIndex& idx) {
  if (op.dimension() != weights.dimension()) {
    throw ConfigurationError("convolution_scales: operator and weights differ in dimension");
  }
  Eigen::VectorXd out(op.dimension());
  for (Index k = 0; k < op.dimension(); ++k) {
    out[k] = convolution_scale(op.eigenvalues()[k], weights.values()[k], dt, idx);
  }
  return out;
}

Field sample_convolution_increment(const Operator& op, const NoiseWeights& weights, double dt,
                                   const StableIndex& idx, NoiseStream& stream) {
  const Eigen::VectorXd scales = convolution_scales(op, weights, dt, idx);
  Eigen::VectorXd out(op.dimension());
  for (Index k = 0; k < op.dimension(); ++k) {
    out[k] = scales[k] == 0.0
                 ? 0.0
                 : scales[k] * stream.standard_stable_at(idx, stream.cursor(),
                                                         static_cast<std::uint32_t>(k));
  }
  stream.advance();
  return Field(std::move(out));
}

void fill_standard_stable(const StableIndex& idx, std::uint64_t seed, NoiseRole role,
                          std::span<const std::uint32_t> trajectories, std::int64_t step,
                          Eigen::MatrixXd& out) {
  const double alpha = idx.value();
  for (Index e = 0; e < out.cols(); ++e) {
    const StreamKey key{seed, role, trajectories[static_cast<std::size_t>(e)]};
    for (Index k = 0; k < out.rows(); ++k) {
      const auto [u1, u2] = uniform_pair(key, step, static_cast<std::uint32_t>(k));
      out(k, e) = standard_stable_from_uniforms(alpha, u1, u2);
    }
  }
}

}  // namespace stablescale
