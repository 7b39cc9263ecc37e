#pragma once

// Exponential-Euler steppers: exact semigroup factors, drift frozen at the
// left endpoint, exact-law stable convolution increments. Ensembles are N x E
// matrices, one column per trajectory; each column depends only on its own
// stream keys.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stablescale/model.hpp"
#include "stablescale/stable_noise.hpp"

namespace stablescale {

/// floor(t / delta) * delta, returning k * delta exactly when t = k * delta.
double floor_grid(double t, double delta);

/// The drift time t / eps seen by F and G along a slow-fast trajectory.
inline double fast_time(double t, double eps) { return t / eps; }

struct SlowFastState {
  double t = 0.0;
  Field x;
  Field y;
  double eps = 1.0;
};

struct SlowFastStreams {
  NoiseStream slow;
  NoiseStream fast;
};

/// Advances (X, Y) by dt. Consumes one slow step and fast_substeps fast steps.
SlowFastState step_slowfast(const ValidatedModel& model, const SlowFastState& state, double dt,
                            SlowFastStreams& streams);

/// Columns of an ensemble of paths on the uniform grid t_n = n T / steps.
struct EnsemblePath {
  std::uint64_t seed = 0;
  double eps = 1.0;
  std::vector<std::uint32_t> trajectories;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> x;  ///< N x E per grid time
  std::vector<Eigen::MatrixXd> y;  ///< empty for averaged runs
  std::vector<std::int64_t> slow_noise_steps;
  std::vector<std::int64_t> fast_noise_steps;

  Index size() const { return static_cast<Index>(trajectories.size()); }
  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

/// A single trajectory with its replay keys.
struct Trajectory {
  std::uint64_t seed = 0;
  std::uint32_t trajectory_id = 0;
  double eps = 1.0;
  std::vector<double> times;
  std::vector<Field> x;
  std::vector<Field> y;
  std::vector<std::int64_t> slow_noise_steps;
  std::vector<std::int64_t> fast_noise_steps;
};

Trajectory extract(const EnsemblePath& path, Index column);

struct EnsembleOptions {
  unsigned threads = 1;
  /// Columns per work item. Fixed so that results do not depend on the
  /// number of threads.
  Index chunk = 16;
};

EnsemblePath simulate_slowfast_ensemble(const ValidatedModel& model, double eps, double T,
                                        Index macro_steps, std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const EnsembleOptions& options = {});

Trajectory simulate_slowfast(const ValidatedModel& model, double eps, double T,
                             Index macro_steps, std::uint64_t seed, std::uint32_t trajectory_id);

/// Drift of an averaged equation, evaluated column-wise at drift time s.
using EnsembleDrift = std::function<Eigen::MatrixXd(double s, const Eigen::MatrixXd& x)>;

/// dX = [A X + drift(s, X)] dt + dL with s = t / eps when eps is given and
/// s = t otherwise. Replays exactly the slow-noise keys of the slow-fast run
/// with the same (seed, trajectories, grid).
EnsemblePath simulate_averaged_ensemble(const ValidatedModel& model, const EnsembleDrift& drift,
                                        std::optional<double> eps, double T, Index macro_steps,
                                        std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const EnsembleOptions& options = {});

Trajectory simulate_averaged(const ValidatedModel& model, const EnsembleDrift& drift,
                             std::optional<double> eps, double T, Index macro_steps,
                             std::uint64_t seed, std::uint32_t trajectory_id);

/// Path of the frozen equation dY = [B Y + G(t, x, Y)] dt + dZ started at
/// time s (possibly negative). The noise is two-sided: grid cell
/// [i dt, (i+1) dt) uses FastNoiseZ step i for i >= 0 and the independent
/// FrozenNegativeTimeCopy step -i-1 for i < 0.
struct FrozenRun {
  double s = 0.0;
  Field x;
  Field y;
  std::vector<double> times;
  std::vector<Field> path;
};

struct FrozenOptions {
  double dt = 0.01;
  bool record_path = false;
  bool noise_free = false;
  /// Fast drift to freeze; defaults to the model's G.
  const DriftFamily* drift = nullptr;
};

/// Ensemble version: columns of y0 are initial values (a single column is
/// shared). Returns endpoints (N x E) and, if requested, the whole path.
struct FrozenEnsemble {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> path;
  Eigen::MatrixXd endpoint;
};

FrozenEnsemble simulate_frozen_ensemble(const ValidatedModel& model, double s, double t_end,
                                        const Field& x, const Eigen::MatrixXd& y0,
                                        std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const FrozenOptions& options = {});

FrozenRun simulate_frozen(const ValidatedModel& model, double s, double t_end, const Field& x,
                          const Field& y, std::uint64_t seed, std::uint32_t trajectory_id,
                          const FrozenOptions& options = {});

/// Block-frozen auxiliary fast process: on [k delta, (k+1) delta) it solves
/// the fast equation with the slow input frozen at X(k delta), restarted from
/// Y(k delta), driven by the same fast-noise increments as `base`.
std::vector<Eigen::MatrixXd> simulate_auxiliary(const ValidatedModel& model, double delta,
                                                const EnsemblePath& base);

}  // namespace stablescale
