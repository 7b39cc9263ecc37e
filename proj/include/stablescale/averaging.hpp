#pragma once

// Averaged drifts of the slow equation:
//   F-bar(t, x)  = E F(t, x, eta_t^x), eta_t^x ~ mu_t^x (evolution system of
//                  measures of the frozen equation, started in the far past),
//   F-bar_P(x)   = period average of F-bar(., x),
//   F-bar_A(x)   = E F~(x, Y~) under the invariant measure of the asymptotic
//                  frozen equation,
// by Monte Carlo over frozen runs, plus closed forms for affine families.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "stablescale/dynamics.hpp"
#include "stablescale/model.hpp"

namespace stablescale {

struct DriftEstimate {
  Field value;
  Eigen::VectorXd std_error;        ///< per-mode standard error (zero when exact)
  Eigen::VectorXd median_of_means;  ///< heavy-tail diagnostic, same units as value
  Index samples = 0;

  /// Euclidean norm of the per-mode standard errors.
  double combined_stderr() const { return std_error.norm(); }
};

struct FrozenSampling {
  double dt = 0.01;
  Index blocks = 8;                       ///< median-of-means blocks for the diagnostic
  std::optional<Eigen::VectorXd> initial_y;  ///< default: zero field
  /// Length of a noise-free frozen run ending at t - burn_in whose endpoint
  /// replaces the initial value; 0 disables it.
  double warm_start = 0.0;
  unsigned threads = 1;
};

/// 2 ln(100 (1 + |x|)) / (beta_1 - L_G): mixing horizon for about 1% bias.
double default_burn_in(const ValidatedModel& model, const Field& x);

DriftEstimate estimate_evolution_drift(const ValidatedModel& model, double t, const Field& x,
                                       Index ensemble_size, double burn_in, std::uint64_t seed,
                                       const FrozenSampling& sampling = {});

/// Period of the averaged drift: the common period of F and G (or the one
/// that exists when the other coefficient is time-independent).
CommonPeriod averaging_period(const ValidatedModel& model);

/// Composite trapezoid over one period with `nodes` equispaced nodes starting
/// at `offset`, for any pointwise estimator of F-bar(t, x).
DriftEstimate periodic_average(const std::function<DriftEstimate(double t)>& drift_at,
                               double period, Index nodes, double offset = 0.0);

DriftEstimate periodic_average_drift(const ValidatedModel& model, const Field& x, Index nodes,
                                     Index ensemble_size, double burn_in, std::uint64_t seed,
                                     double offset = 0.0, const FrozenSampling& sampling = {});

struct ErgodicSampling {
  double dt = 0.01;
  Index batches = 8;
};

DriftEstimate asymptotic_average_drift(const ValidatedModel& model, const Field& x,
                                       double ergodic_horizon, double burn_in,
                                       std::uint64_t seed, const ErgodicSampling& sampling = {});

/// Closed forms for affine fast drifts (constant, sinusoidal, or relaxing
/// offset) and slow drifts affine in y. Exploits that symmetric stable noise
/// with alpha > 1 has mean zero, so the mean of mu_t^x solves the linear ODE
/// m' = -(B - g_y) m + forcing(t) + g_x x.
class AffineDriftOracle {
 public:
  explicit AffineDriftOracle(const ValidatedModel& model);

  /// Mean of mu_t^x for every column of x.
  Eigen::MatrixXd frozen_mean(double t, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd evolution(double t, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd periodic(const Eigen::MatrixXd& x, Index nodes) const;
  Eigen::MatrixXd asymptotic(const Eigen::MatrixXd& x) const;

  Field evolution(double t, const Field& x) const;
  Field periodic(const Field& x, Index nodes) const;
  Field asymptotic(const Field& x) const;

 private:
  Eigen::VectorXd forcing_response(const DriftFamily& g, double t) const;

  const ValidatedModel* model_;
  Eigen::VectorXd kappa_;  // beta_k - g_y
};

Field analytic_affine_drift_oracle(const ValidatedModel& model, double t, const Field& x);

struct Phi2Options {
  Index points_per_scale = 1000;
  /// Window starts are searched on [0, max(T, search_horizon / beta_1)].
  double search_horizon = 20.0;
};

/// sup_{t >= 0} (1/T) int_t^{t+T} int_0^s e^{-beta_1 (s-u)} phi2(u) du ds.
double phi2_tilde(const std::function<double(double)>& phi2, double beta1, double T,
                  const Phi2Options& options = {});
double phi2_tilde(const ValidatedModel& model, double T, const Phi2Options& options = {});

enum class ReferenceKind { EvolutionAveraged, PeriodicAveraged, AsymptoticAveraged };
enum class DriftEstimator { AnalyticOracle, MonteCarlo };

std::string to_string(ReferenceKind kind);
ReferenceKind parse_reference_kind(const std::string& name);
std::string to_string(DriftEstimator estimator);
DriftEstimator parse_drift_estimator(const std::string& name);

struct AveragedDriftSettings {
  DriftEstimator estimator = DriftEstimator::AnalyticOracle;
  Index ensemble_size = 1000;
  std::optional<double> burn_in;
  Index quadrature_nodes = 16;
  double ergodic_horizon = 500.0;
  FrozenSampling frozen;
  std::uint64_t seed = 0;
  bool cache = false;
  double cache_time_bucket = 1e-3;
  double cache_x_quantum = 1e-3;
};

/// One averaged drift ready to plug into simulate_averaged_ensemble.
class AveragedDrift {
 public:
  AveragedDrift(std::shared_ptr<const ValidatedModel> model, ReferenceKind kind,
                AveragedDriftSettings settings);

  ReferenceKind kind() const { return kind_; }
  /// Whether the averaged equation reads its drift at t / eps.
  bool scaled_time() const { return kind_ == ReferenceKind::EvolutionAveraged; }

  Eigen::MatrixXd operator()(double s, const Eigen::MatrixXd& x) const;
  EnsembleDrift as_ensemble_drift() const;

  std::size_t cache_size() const;

 private:
  Eigen::VectorXd monte_carlo(double s, const Eigen::VectorXd& x) const;

  std::shared_ptr<const ValidatedModel> model_;
  ReferenceKind kind_;
  AveragedDriftSettings settings_;
  std::optional<AffineDriftOracle> oracle_;

  struct CacheState {
    std::mutex mutex;
    std::map<std::pair<std::int64_t, std::uint64_t>, Eigen::VectorXd> entries;
  };
  std::shared_ptr<CacheState> cache_;
};

}  // namespace stablescale
