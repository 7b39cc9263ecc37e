#include "stablescale/averaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "stablescale/errors.hpp"
#include "stablescale/parallel.hpp"
#include "stablescale/philox.hpp"
#include "stablescale/statistics.hpp"

namespace stablescale {
namespace {

constexpr Index kFrozenChunk = 64;

std::vector<std::uint32_t> iota_ids(Index count) {
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

DriftEstimate exact_estimate(Field value, Index samples) {
  DriftEstimate out;
  out.std_error = Eigen::VectorXd::Zero(value.dimension());
  out.median_of_means = value.coeffs();
  out.value = std::move(value);
  out.samples = samples;
  return out;
}

// Per-mode mean, standard error and median of means of an N x E sample matrix.
DriftEstimate summarize(const Eigen::MatrixXd& samples, Index blocks) {
  const Index n = samples.rows();
  Eigen::VectorXd mean(n), se(n), mom(n);
  const Index k = std::clamp<Index>(blocks, 1, samples.cols());
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = samples.row(i).transpose();
    const MeanEstimate m = mean_with_error(row);
    mean[i] = m.mean;
    se[i] = m.std_error;
    mom[i] = median_of_means(row, k);
  }
  DriftEstimate out;
  out.value = Field(std::move(mean));
  out.std_error = std::move(se);
  out.median_of_means = std::move(mom);
  out.samples = samples.cols();
  return out;
}

std::uint64_t hash_words(std::uint64_t h, std::uint64_t word) {
  return mix64(h ^ mix64(word));
}

}  // namespace

double default_burn_in(const ValidatedModel& model, const Field& x) {
  const double gap = model.spectral_gap();
  if (!(gap > 0.0)) throw DomainError("default_burn_in: spectral gap must be positive");
  return 2.0 * std::log(100.0 * (1.0 + x.norm())) / gap;
}

DriftEstimate estimate_evolution_drift(const ValidatedModel& model, double t, const Field& x,
                                       Index ensemble_size, double burn_in, std::uint64_t seed,
                                       const FrozenSampling& sampling) {
  require_same_dimension(x, model.A(), "estimate_evolution_drift");
  if (ensemble_size < 1) throw DomainError("estimate_evolution_drift: ensemble size must be positive");
  if (!(burn_in > 0.0)) throw DomainError("estimate_evolution_drift: burn-in must be positive");
  const Index n = model.dimension();
  if (!model.F().depends_on_y()) {
    return exact_estimate(eval_drift(model.F(), t, x, Field::Zero(n), model.grid()), ensemble_size);
  }

  Eigen::VectorXd y0 = sampling.initial_y.value_or(Eigen::VectorXd::Zero(n));
  if (y0.size() != n) throw ConfigurationError("estimate_evolution_drift: initial y has the wrong dimension");
  if (sampling.warm_start < 0.0) throw DomainError("estimate_evolution_drift: warm start must be nonnegative");
  Eigen::MatrixXd y0m = y0;
  if (sampling.warm_start > 0.0) {
    FrozenOptions quiet;
    quiet.dt = sampling.dt;
    quiet.noise_free = true;
    const std::uint32_t id = 0;
    y0m = simulate_frozen_ensemble(model, t - burn_in - sampling.warm_start, t - burn_in, x, y0m,
                                   seed, std::span<const std::uint32_t>(&id, 1), quiet)
              .endpoint;
  }
  const std::vector<std::uint32_t> ids = iota_ids(ensemble_size);
  const Eigen::MatrixXd xm = x.coeffs();
  Eigen::MatrixXd samples(n, ensemble_size);
  FrozenOptions opts;
  opts.dt = sampling.dt;
  const Index chunks = (ensemble_size + kFrozenChunk - 1) / kFrozenChunk;
  parallel_for(static_cast<std::size_t>(chunks), resolve_threads(sampling.threads),
               [&](std::size_t c) {
                 const Index begin = static_cast<Index>(c) * kFrozenChunk;
                 const Index count = std::min(kFrozenChunk, ensemble_size - begin);
                 const std::span<const std::uint32_t> part(ids.data() + begin,
                                                           static_cast<std::size_t>(count));
                 const FrozenEnsemble run =
                     simulate_frozen_ensemble(model, t - burn_in, t, x, y0m, seed, part, opts);
                 samples.middleCols(begin, count) =
                     eval_drift(model.F(), t, xm, run.endpoint, model.grid());
               });
  return summarize(samples, sampling.blocks);
}

CommonPeriod averaging_period(const ValidatedModel& model) {
  const DriftFamily& f = model.F();
  const DriftFamily& g = model.G();
  for (const DriftFamily* d : {&f, &g}) {
    if (!d->time_independent() && !d->periodic()) {
      throw ConfigurationError("periodic average requires periodic or time-independent coefficients, got " +
                               to_string(d->kind));
    }
  }
  if (f.periodic() && g.periodic()) return common_period(*f.period, *g.period);
  if (f.periodic()) return CommonPeriod{*f.period, 1, 1};
  if (g.periodic()) return CommonPeriod{*g.period, 1, 1};
  return CommonPeriod{Rational(1, 1), 1, 1};
}

DriftEstimate periodic_average(const std::function<DriftEstimate(double t)>& drift_at,
                               double period, Index nodes, double offset) {
  if (nodes < 1) throw ConfigurationError("periodic_average: need at least one node");
  if (!(period > 0.0)) throw DomainError("periodic_average: period must be positive");
  DriftEstimate total;
  Eigen::VectorXd value, var, mom;
  for (Index j = 0; j < nodes; ++j) {
    const DriftEstimate e = drift_at(offset + period * static_cast<double>(j) / static_cast<double>(nodes));
    if (j == 0) {
      value = e.value.coeffs();
      var = e.std_error.array().square();
      mom = e.median_of_means;
    } else {
      value += e.value.coeffs();
      var += e.std_error.array().square().matrix();
      mom += e.median_of_means;
    }
    total.samples += e.samples;
  }
  const double inv = 1.0 / static_cast<double>(nodes);
  total.value = Field(value * inv);
  total.std_error = var.array().sqrt().matrix() * inv;
  total.median_of_means = mom * inv;
  return total;
}

DriftEstimate periodic_average_drift(const ValidatedModel& model, const Field& x, Index nodes,
                                     Index ensemble_size, double burn_in, std::uint64_t seed,
                                     double offset, const FrozenSampling& sampling) {
  const double tau = averaging_period(model).tau.to_double();
  Index node = 0;
  return periodic_average(
      [&](double t) {
        return estimate_evolution_drift(model, t, x, ensemble_size, burn_in,
                                        derive_seed(seed, static_cast<std::uint64_t>(node++)),
                                        sampling);
      },
      tau, nodes, offset);
}

DriftEstimate asymptotic_average_drift(const ValidatedModel& model, const Field& x,
                                       double ergodic_horizon, double burn_in,
                                       std::uint64_t seed, const ErgodicSampling& sampling) {
  require_same_dimension(x, model.A(), "asymptotic_average_drift");
  const auto& ft = model.F_tilde();
  const auto& gt = model.G_tilde();
  if (!ft || !gt) {
    throw ConfigurationError("asymptotic average requires time-independent limits of F and G");
  }
  if (!(ergodic_horizon > 0.0)) throw DomainError("asymptotic_average_drift: horizon must be positive");
  if (!(burn_in >= 0.0)) throw DomainError("asymptotic_average_drift: burn-in must be nonnegative");
  const Index n = model.dimension();
  if (!ft->depends_on_y()) {
    return exact_estimate(eval_drift(*ft, 0.0, x, Field::Zero(n), model.grid()), 1);
  }
  FrozenOptions opts;
  opts.dt = sampling.dt;
  opts.record_path = true;
  opts.drift = &*gt;
  const std::uint32_t id = 0;
  const FrozenEnsemble run = simulate_frozen_ensemble(
      model, 0.0, burn_in + ergodic_horizon, x, Eigen::MatrixXd::Zero(n, 1), seed,
      std::span<const std::uint32_t>(&id, 1), opts);

  // Left-endpoint time average over the window after burn-in.
  std::size_t first = 0;
  while (first < run.times.size() && run.times[first] < burn_in - 1e-9 * sampling.dt) ++first;
  const std::size_t last = run.times.size() - 1;
  if (last <= first) throw ConfigurationError("asymptotic_average_drift: empty averaging window");
  Eigen::MatrixXd ys(n, static_cast<Index>(last - first));
  Eigen::VectorXd weights(ys.cols());
  for (std::size_t i = first; i < last; ++i) {
    ys.col(static_cast<Index>(i - first)) = run.path[i].col(0);
    weights[static_cast<Index>(i - first)] = run.times[i + 1] - run.times[i];
  }
  const Eigen::MatrixXd values = eval_drift(*ft, 0.0, Eigen::MatrixXd(x.coeffs()), ys, model.grid());
  const double total = weights.sum();
  const Index batches = std::clamp<Index>(sampling.batches, 2, values.cols());

  Eigen::VectorXd mean = values * weights / total;
  Eigen::VectorXd se(n), mom(n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = values.row(i).transpose();
    const std::vector<double> means = block_means(row, batches);
    const Eigen::Map<const Eigen::VectorXd> bm(means.data(), static_cast<Index>(means.size()));
    se[i] = mean_with_error(bm).std_error;
    mom[i] = median_of_means(row, batches);
  }
  DriftEstimate out;
  out.value = Field(std::move(mean));
  out.std_error = std::move(se);
  out.median_of_means = std::move(mom);
  out.samples = values.cols();
  return out;
}

AffineDriftOracle::AffineDriftOracle(const ValidatedModel& model) : model_(&model) {
  const DriftFamily& g = model.G();
  const DriftFamily& f = model.F();
  if (g.saturating()) {
    throw UnsupportedError("analytic oracle needs an affine fast drift, got saturating_nonlinear");
  }
  if (f.saturating() && f.depends_on_y()) {
    throw UnsupportedError("analytic oracle needs a slow drift affine in y");
  }
  kappa_ = model.B().eigenvalues().array() - g.coeff_y;
  if ((kappa_.array() <= 0.0).any()) {
    throw DomainError("analytic oracle: beta_k - g_y must be positive");
  }
}

Eigen::VectorXd AffineDriftOracle::forcing_response(const DriftFamily& g, double t) const {
  const Index n = kappa_.size();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  if (g.amplitude == 0.0) return p;
  switch (g.kind) {
    case DriftKind::Affine:
    case DriftKind::SaturatingNonlinear:
      break;
    case DriftKind::SinusoidalTime: {
      if (!g.period) break;
      const double tau = g.period->to_double();
      const double omega = 2.0 * std::numbers::pi / tau;
      const double cycles = t / tau;
      const double arg = 2.0 * std::numbers::pi * (cycles - std::floor(cycles)) + g.phase;
      const double s = std::sin(arg);
      const double c = std::cos(arg);
      for (Index k = 0; k < n; ++k) {
        const double kap = kappa_[k];
        p[k] = g.amplitude * (kap * s - omega * c) / (kap * kap + omega * omega);
      }
      break;
    }
    case DriftKind::ExponentialRelaxation: {
      const double r = g.rate;
      for (Index k = 0; k < n; ++k) {
        const double kap = kappa_[k];
        double v;
        if (t <= 0.0) {
          v = std::exp(r * t) / (kap + r);
        } else if (kap == r) {
          v = std::exp(-kap * t) / (kap + r) + t * std::exp(-kap * t);
        } else {
          v = std::exp(-kap * t) / (kap + r) +
              std::exp(-r * t) * (-std::expm1(-(kap - r) * t)) / (kap - r);
        }
        p[k] = g.amplitude * v;
      }
      break;
    }
  }
  return p;
}

Eigen::MatrixXd AffineDriftOracle::frozen_mean(double t, const Eigen::MatrixXd& x) const {
  const DriftFamily& g = model_->G();
  const Eigen::VectorXd& u = model_->grid().unit_projection();
  const Eigen::VectorXd shift =
      (g.offset * u).cwiseQuotient(kappa_) + u.cwiseProduct(forcing_response(g, t));
  Eigen::MatrixXd m = (g.coeff_x * x).array().colwise() / kappa_.array();
  m.colwise() += shift;
  return m;
}

Eigen::MatrixXd AffineDriftOracle::evolution(double t, const Eigen::MatrixXd& x) const {
  return eval_drift(model_->F(), t, x, frozen_mean(t, x), model_->grid());
}

Eigen::MatrixXd AffineDriftOracle::periodic(const Eigen::MatrixXd& x, Index nodes) const {
  if (nodes < 1) throw ConfigurationError("periodic: need at least one node");
  const double tau = averaging_period(*model_).tau.to_double();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (Index j = 0; j < nodes; ++j) {
    sum += evolution(tau * static_cast<double>(j) / static_cast<double>(nodes), x);
  }
  return sum / static_cast<double>(nodes);
}

Eigen::MatrixXd AffineDriftOracle::asymptotic(const Eigen::MatrixXd& x) const {
  const auto& ft = model_->F_tilde();
  const auto& gt = model_->G_tilde();
  if (!ft || !gt) {
    throw ConfigurationError("asymptotic average requires time-independent limits of F and G");
  }
  const Eigen::VectorXd& u = model_->grid().unit_projection();
  const Eigen::ArrayXd kap = model_->B().eigenvalues().array() - gt->coeff_y;
  Eigen::MatrixXd m = (gt->coeff_x * x).array().colwise() / kap;
  m.colwise() += (gt->offset * u.array() / kap).matrix();
  return eval_drift(*ft, 0.0, x, m, model_->grid());
}

Field AffineDriftOracle::evolution(double t, const Field& x) const {
  return Field(evolution(t, Eigen::MatrixXd(x.coeffs())).col(0));
}

Field AffineDriftOracle::periodic(const Field& x, Index nodes) const {
  return Field(periodic(Eigen::MatrixXd(x.coeffs()), nodes).col(0));
}

Field AffineDriftOracle::asymptotic(const Field& x) const {
  return Field(asymptotic(Eigen::MatrixXd(x.coeffs())).col(0));
}

Field analytic_affine_drift_oracle(const ValidatedModel& model, double t, const Field& x) {
  return AffineDriftOracle(model).evolution(t, x);
}

double phi2_tilde(const std::function<double(double)>& phi2, double beta1, double T,
                  const Phi2Options& options) {
  if (!(beta1 > 0.0)) throw DomainError("phi2_tilde: beta_1 must be positive");
  if (!(T > 0.0)) throw DomainError("phi2_tilde: T must be positive");
  if (options.points_per_scale < 1) throw ConfigurationError("phi2_tilde: points_per_scale must be positive");
  const double h0 = std::min(T, 1.0 / beta1) / static_cast<double>(options.points_per_scale);
  const auto window = static_cast<Index>(std::ceil(T / h0));
  const double h = T / static_cast<double>(window);
  const double horizon = std::max(T, options.search_horizon / beta1);
  const Index starts = static_cast<Index>(std::ceil(horizon / h));
  const Index total = starts + window;

  // I(s) = int_0^s e^{-beta1 (s-u)} phi2(u) du on the grid, then its running integral.
  const double decay = std::exp(-beta1 * h);
  std::vector<double> cumulative(static_cast<std::size_t>(total) + 1, 0.0);
  double prev_phi = phi2(0.0);
  double inner = 0.0;
  for (Index i = 1; i <= total; ++i) {
    const double s = h * static_cast<double>(i);
    const double phi = phi2(s);
    const double next = decay * inner + 0.5 * h * (decay * prev_phi + phi);
    cumulative[static_cast<std::size_t>(i)] =
        cumulative[static_cast<std::size_t>(i - 1)] + 0.5 * h * (inner + next);
    inner = next;
    prev_phi = phi;
  }
  double best = 0.0;
  for (Index i = 0; i <= starts; ++i) {
    const double avg = (cumulative[static_cast<std::size_t>(i + window)] -
                        cumulative[static_cast<std::size_t>(i)]) / T;
    best = std::max(best, avg);
  }
  return best;
}

double phi2_tilde(const ValidatedModel& model, double T, const Phi2Options& options) {
  const DriftFamily& g = model.G();
  if (!g.pointwise_target()) {
    throw ConfigurationError("phi2_tilde: the fast drift has no pointwise time-independent limit");
  }
  return phi2_tilde([&g](double u) { return g.pointwise_profile(u); }, model.B().first(), T,
                    options);
}

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::EvolutionAveraged:
      return "evolution";
    case ReferenceKind::PeriodicAveraged:
      return "periodic";
    case ReferenceKind::AsymptoticAveraged:
      return "asymptotic";
  }
  return "unknown";
}

ReferenceKind parse_reference_kind(const std::string& name) {
  if (name == "evolution") return ReferenceKind::EvolutionAveraged;
  if (name == "periodic") return ReferenceKind::PeriodicAveraged;
  if (name == "asymptotic") return ReferenceKind::AsymptoticAveraged;
  throw ConfigurationError("unknown averaged drift kind '" + name +
                           "' (expected evolution, periodic, or asymptotic)");
}

std::string to_string(DriftEstimator estimator) {
  return estimator == DriftEstimator::AnalyticOracle ? "oracle" : "monte_carlo";
}

DriftEstimator parse_drift_estimator(const std::string& name) {
  if (name == "oracle") return DriftEstimator::AnalyticOracle;
  if (name == "monte_carlo") return DriftEstimator::MonteCarlo;
  throw ConfigurationError("unknown drift estimator '" + name + "' (expected oracle or monte_carlo)");
}

AveragedDrift::AveragedDrift(std::shared_ptr<const ValidatedModel> model, ReferenceKind kind,
                             AveragedDriftSettings settings)
    : model_(std::move(model)),
      kind_(kind),
      settings_(std::move(settings)),
      cache_(std::make_shared<CacheState>()) {
  if (!model_) throw ConfigurationError("AveragedDrift: null model");
  if (kind_ == ReferenceKind::PeriodicAveraged) (void)averaging_period(*model_);
  if (kind_ == ReferenceKind::AsymptoticAveraged && (!model_->F_tilde() || !model_->G_tilde())) {
    throw ConfigurationError("asymptotic average requires time-independent limits of F and G");
  }
  if (settings_.estimator == DriftEstimator::AnalyticOracle) oracle_.emplace(*model_);
}

Eigen::VectorXd AveragedDrift::monte_carlo(double s, const Eigen::VectorXd& x) const {
  const double t = kind_ == ReferenceKind::EvolutionAveraged ? s : 0.0;
  std::uint64_t key = 0x9e3779b97f4a7c15ULL;
  for (Index k = 0; k < x.size(); ++k) {
    key = hash_words(key, static_cast<std::uint64_t>(std::llround(x[k] / settings_.cache_x_quantum)));
  }
  const auto bucket = static_cast<std::int64_t>(std::llround(t / settings_.cache_time_bucket));
  if (settings_.cache) {
    std::lock_guard lock(cache_->mutex);
    const auto it = cache_->entries.find({bucket, key});
    if (it != cache_->entries.end()) return it->second;
  }

  const Field xf(x);
  const double burn = settings_.burn_in.value_or(default_burn_in(*model_, xf));
  const std::uint64_t seed =
      hash_words(hash_words(settings_.seed, std::bit_cast<std::uint64_t>(t)), key);
  Eigen::VectorXd value;
  switch (kind_) {
    case ReferenceKind::EvolutionAveraged:
      value = estimate_evolution_drift(*model_, t, xf, settings_.ensemble_size, burn, seed,
                                       settings_.frozen).value.coeffs();
      break;
    case ReferenceKind::PeriodicAveraged:
      value = periodic_average_drift(*model_, xf, settings_.quadrature_nodes,
                                     settings_.ensemble_size, burn, seed, 0.0, settings_.frozen)
                  .value.coeffs();
      break;
    case ReferenceKind::AsymptoticAveraged: {
      ErgodicSampling ergodic;
      ergodic.dt = settings_.frozen.dt;
      value = asymptotic_average_drift(*model_, xf, settings_.ergodic_horizon, burn, seed, ergodic)
                  .value.coeffs();
      break;
    }
  }
  if (settings_.cache) {
    std::lock_guard lock(cache_->mutex);
    cache_->entries.emplace(std::make_pair(bucket, key), value);
  }
  return value;
}

Eigen::MatrixXd AveragedDrift::operator()(double s, const Eigen::MatrixXd& x) const {
  if (oracle_) {
    switch (kind_) {
      case ReferenceKind::EvolutionAveraged:
        return oracle_->evolution(s, x);
      case ReferenceKind::PeriodicAveraged:
        return oracle_->periodic(x, settings_.quadrature_nodes);
      case ReferenceKind::AsymptoticAveraged:
        return oracle_->asymptotic(x);
    }
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) out.col(c) = monte_carlo(s, x.col(c));
  return out;
}

EnsembleDrift AveragedDrift::as_ensemble_drift() const {
  return [self = *this](double s, const Eigen::MatrixXd& x) { return self(s, x); };
}

std::size_t AveragedDrift::cache_size() const {
  std::lock_guard lock(cache_->mutex);
  return cache_->entries.size();
}

}  // namespace stablescale
