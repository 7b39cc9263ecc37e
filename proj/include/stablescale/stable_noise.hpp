#pragma once

// Symmetric alpha-stable variates and exact per-mode laws of the stochastic
// convolutions int e^{-lambda (dt - r)} w dZ_r driven by cylindrical stable
// noise. Draws are addressed by (seed, role, trajectory, step, lane) through a
// counter-based generator.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "stablescale/errors.hpp"
#include "stablescale/philox.hpp"
#include "stablescale/spectral_space.hpp"

namespace stablescale {

class StableIndex {
 public:
  explicit StableIndex(double alpha) : alpha_(alpha) {
    if (!(alpha > 1.0 && alpha < 2.0)) {
      throw DomainError("StableIndex: alpha must lie in (1, 2), got " + std::to_string(alpha));
    }
  }
  double value() const { return alpha_; }

 private:
  double alpha_;
};

/// Per-mode noise intensities (rho_k for the slow noise, gamma_k for the fast
/// one). Zero entries switch a mode's noise off.
class NoiseWeights {
 public:
  NoiseWeights() = default;
  explicit NoiseWeights(Eigen::VectorXd weights);

  static NoiseWeights Constant(Index dimension, double value);
  /// w_k = scale * k^power.
  static NoiseWeights PowerLaw(Index dimension, double scale, double power);

  Index dimension() const { return weights_.size(); }
  const Eigen::VectorXd& values() const { return weights_; }

 private:
  Eigen::VectorXd weights_;
};

enum class NoiseRole : std::uint32_t {
  SlowNoiseL = 1,
  FastNoiseZ = 2,
  FrozenNegativeTimeCopy = 3,
};

std::string to_string(NoiseRole role);

struct StreamKey {
  std::uint64_t seed = 0;
  NoiseRole role = NoiseRole::SlowNoiseL;
  std::uint32_t trajectory = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Pair of open-unit uniforms at (key, step, lane).
struct UniformPair {
  double u1;
  double u2;
};

UniformPair uniform_pair(const StreamKey& key, std::int64_t step, std::uint32_t lane);

/// Chambers-Mallows-Stuck map of (uniform, uniform) to a standard symmetric
/// stable variate with E exp(i h S) = exp(-|h|^alpha).
double standard_stable_from_uniforms(double alpha, double u1, double u2);

/// Replayable cursor over one stream. Each step consumes one counter block
/// per lane (two uniforms); lanes index the spectral modes.
class NoiseStream {
 public:
  explicit NoiseStream(StreamKey key, std::int64_t cursor = 0) : key_(key), cursor_(cursor) {}

  const StreamKey& key() const { return key_; }
  std::int64_t cursor() const { return cursor_; }
  void seek(std::int64_t cursor) { cursor_ = cursor; }
  void advance() { ++cursor_; }

  double standard_stable_at(const StableIndex& idx, std::int64_t step, std::uint32_t lane) const {
    const auto [u1, u2] = uniform_pair(key_, step, lane);
    return standard_stable_from_uniforms(idx.value(), u1, u2);
  }

 private:
  StreamKey key_;
  std::int64_t cursor_;
};

/// One standard symmetric stable variate; advances the cursor by one step.
double sample_standard_symmetric_stable(const StableIndex& idx, NoiseStream& stream);

/// Stable scale of int_0^dt weight * e^{-eigenvalue (dt - r)} dZ_r, i.e.
/// weight * ((1 - e^{-alpha eigenvalue dt}) / (alpha eigenvalue))^{1/alpha}.
double convolution_scale(double eigenvalue, double weight, double dt, const StableIndex& idx);

/// Scale of eps^{-1/alpha} int_0^dt e^{-(eigenvalue/eps)(dt - r)} weight dZ_r.
/// Equal to convolution_scale(eigenvalue, weight, dt/eps); bounded in eps.
double rescaled_fast_convolution_scale(double eigenvalue, double weight, double dt,
                                       double eps, const StableIndex& idx);

/// Vector of per-mode convolution scales for a whole operator.
Eigen::VectorXd convolution_scales(const Operator& op, const NoiseWeights& weights,
                                   double dt, const StableIndex& idx);

/// Exact-law increment of the stochastic convolution over one step of length
/// dt; mode k uses lane k of the stream at the current cursor.
Field sample_convolution_increment(const Operator& op, const NoiseWeights& weights, double dt,
                                   const StableIndex& idx, NoiseStream& stream);

/// Fills out(k, e) with standard stable variates at (seed, role,
/// trajectories[e], step, lane k). Columns never depend on each other.
void fill_standard_stable(const StableIndex& idx, std::uint64_t seed, NoiseRole role,
                          std::span<const std::uint32_t> trajectories, std::int64_t step,
                          Eigen::MatrixXd& out);

}  // namespace stablescale
