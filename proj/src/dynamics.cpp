#include "stablescale/dynamics.hpp"

#include <cmath>
#include <string>

#include "stablescale/parallel.hpp"

namespace stablescale {

double floor_grid(double t, double delta) {
  if (!(delta > 0.0)) throw DomainError("floor_grid: delta must be positive");
  const double k = std::round(t / delta);
  if (k * delta == t) return t;
  double g = std::floor(t / delta) * delta;
  double idx = std::floor(t / delta);
  while (g > t) g = --idx * delta;
  while (g + delta <= t) g = ++idx * delta;
  return g;
}

namespace {

struct NoiseSource {
  std::uint64_t seed;
  NoiseRole role;
  std::span<const std::uint32_t> trajectories;

  void fill(const StableIndex& idx, std::int64_t step, Eigen::MatrixXd& out) const {
    fill_standard_stable(idx, seed, role, trajectories, step, out);
  }
};

// Per-mode factors of one exponential-Euler step.
struct StepFactors {
  Eigen::ArrayXd decay;     // e^{-lambda h}
  Eigen::ArrayXd integral;  // (1 - e^{-lambda h}) / lambda
  Eigen::ArrayXd noise;     // exact convolution scale
  bool noisy = false;

  // Slow equation: rates lambda over step h.
  static StepFactors Slow(const ValidatedModel& m, double h) {
    StepFactors f;
    f.decay = semigroup_factors(m.A(), h).array();
    f.integral = semigroup_integral_factors(m.A(), h).array();
    f.noise = convolution_scales(m.A(), m.rho(), h, m.alpha()).array();
    f.noisy = (f.noise != 0.0).any();
    return f;
  }

  // Fast equation dY = (1/eps)[B Y + G] dt + eps^{-1/alpha} dZ over step h.
  static StepFactors Fast(const ValidatedModel& m, double h, double eps) {
    StepFactors f;
    const Index n = m.dimension();
    f.decay.resize(n);
    f.integral.resize(n);
    f.noise.resize(n);
    for (Index k = 0; k < n; ++k) {
      const double beta = m.B().eigenvalues()[k];
      const double z = -std::expm1(-beta * h / eps);
      f.decay[k] = 1.0 - z;
      f.integral[k] = z / beta;
      f.noise[k] = rescaled_fast_convolution_scale(beta, m.gamma().values()[k], h, eps, m.alpha());
    }
    f.noisy = (f.noise != 0.0).any();
    return f;
  }

  void apply(Eigen::MatrixXd& state, const Eigen::MatrixXd& drift,
             const Eigen::MatrixXd& variates) const {
    state.array().colwise() *= decay;
    state.array() += drift.array().colwise() * integral;
    if (noisy) state.array() += variates.array().colwise() * noise;
  }
};

struct SlowFastFactors {
  StepFactors slow;
  StepFactors fast;
  int substeps = 1;
  double dt = 0.0;
  double h = 0.0;

  SlowFastFactors(const ValidatedModel& m, double eps, double dt_)
      : slow(StepFactors::Slow(m, dt_)),
        fast(StepFactors::Fast(m, dt_ / m.spec().fast_substeps, eps)),
        substeps(m.spec().fast_substeps),
        dt(dt_),
        h(dt_ / m.spec().fast_substeps) {}
};

// One macro step of the coupled system for a block of columns.
void advance_slowfast(const ValidatedModel& m, const SlowFastFactors& c, double t, double eps,
                      Eigen::MatrixXd& X, Eigen::MatrixXd& Y, const NoiseSource& slow,
                      std::int64_t slow_step, const NoiseSource& fast, std::int64_t fast_step0,
                      Eigen::MatrixXd& scratch) {
  const auto& grid = m.grid();
  const Eigen::MatrixXd nodal_x = grid.to_physical(X);
  Eigen::MatrixXd nodal_y = grid.to_physical(Y);
  const Eigen::MatrixXd drift_x = eval_drift_nodal(m.F(), fast_time(t, eps), nodal_x, nodal_y, grid);
  for (int j = 0; j < c.substeps; ++j) {
    if (j > 0) nodal_y = grid.to_physical(Y);
    const double tj = j == 0 ? t : t + j * c.h;
    const Eigen::MatrixXd drift_y =
        eval_drift_nodal(m.G(), fast_time(tj, eps), nodal_x, nodal_y, grid);
    if (c.fast.noisy) fast.fill(m.alpha(), fast_step0 + j, scratch);
    c.fast.apply(Y, drift_y, scratch);
  }
  if (c.slow.noisy) slow.fill(m.alpha(), slow_step, scratch);
  c.slow.apply(X, drift_x, scratch);
}

void check_grid(double T, Index steps) {
  if (!(T > 0.0) || steps < 1) {
    throw DomainError("time grid needs T > 0 and at least one step");
  }
}

std::vector<double> uniform_times(double T, Index steps) {
  std::vector<double> times(static_cast<std::size_t>(steps + 1));
  const double dt = T / static_cast<double>(steps);
  for (Index n = 0; n <= steps; ++n) times[static_cast<std::size_t>(n)] = n * dt;
  times.back() = T;
  return times;
}

template <typename ChunkFn>
void for_each_chunk(Index total, const EnsembleOptions& options, ChunkFn&& fn) {
  const Index chunk = std::max<Index>(1, options.chunk);
  const Index chunks = (total + chunk - 1) / chunk;
  parallel_for(static_cast<std::size_t>(chunks), options.threads, [&](std::size_t c) {
    const Index begin = static_cast<Index>(c) * chunk;
    fn(begin, std::min(chunk, total - begin));
  });
}

}  // namespace

Trajectory extract(const EnsemblePath& path, Index column) {
  if (column < 0 || column >= path.size()) {
    throw ConfigurationError("extract: column out of range");
  }
  Trajectory t;
  t.seed = path.seed;
  t.trajectory_id = path.trajectories[static_cast<std::size_t>(column)];
  t.eps = path.eps;
  t.times = path.times;
  for (const auto& m : path.x) t.x.emplace_back(m.col(column));
  for (const auto& m : path.y) t.y.emplace_back(m.col(column));
  t.slow_noise_steps = path.slow_noise_steps;
  t.fast_noise_steps = path.fast_noise_steps;
  return t;
}

SlowFastState step_slowfast(const ValidatedModel& model, const SlowFastState& state, double dt,
                            SlowFastStreams& streams) {
  if (!(dt > 0.0)) throw DomainError("step_slowfast: dt must be positive");
  if (!(state.eps > 0.0)) throw DomainError("step_slowfast: eps must be positive");
  require_same_dimension(state.x, model.A(), "step_slowfast");
  require_same_dimension(state.y, model.B(), "step_slowfast");
  const SlowFastFactors c(model, state.eps, dt);
  Eigen::MatrixXd X = state.x.coeffs();
  Eigen::MatrixXd Y = state.y.coeffs();
  Eigen::MatrixXd scratch(model.dimension(), 1);
  const std::uint32_t slow_id = streams.slow.key().trajectory;
  const std::uint32_t fast_id = streams.fast.key().trajectory;
  const NoiseSource slow{streams.slow.key().seed, streams.slow.key().role, {&slow_id, 1}};
  const NoiseSource fast{streams.fast.key().seed, streams.fast.key().role, {&fast_id, 1}};
  advance_slowfast(model, c, state.t, state.eps, X, Y, slow, streams.slow.cursor(), fast,
                   streams.fast.cursor(), scratch);
  streams.slow.advance();
  for (int j = 0; j < c.substeps; ++j) streams.fast.advance();
  return {state.t + dt, Field(X.col(0)), Field(Y.col(0)), state.eps};
}

EnsemblePath simulate_slowfast_ensemble(const ValidatedModel& model, double eps, double T,
                                        Index macro_steps, std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const EnsembleOptions& options) {
  check_grid(T, macro_steps);
  if (!(eps > 0.0)) throw DomainError("simulate_slowfast: eps must be positive");
  const Index n = model.dimension();
  const Index E = static_cast<Index>(trajectories.size());
  EnsemblePath path;
  path.seed = seed;
  path.eps = eps;
  path.trajectories.assign(trajectories.begin(), trajectories.end());
  path.times = uniform_times(T, macro_steps);
  path.x.assign(path.times.size(), Eigen::MatrixXd(n, E));
  path.y.assign(path.times.size(), Eigen::MatrixXd(n, E));
  const SlowFastFactors c(model, eps, T / static_cast<double>(macro_steps));
  for (Index s = 0; s < macro_steps; ++s) {
    path.slow_noise_steps.push_back(s);
    for (int j = 0; j < c.substeps; ++j) path.fast_noise_steps.push_back(s * c.substeps + j);
  }

  for_each_chunk(E, options, [&](Index begin, Index count) {
    const auto ids = trajectories.subspan(static_cast<std::size_t>(begin),
                                          static_cast<std::size_t>(count));
    const NoiseSource slow{seed, NoiseRole::SlowNoiseL, ids};
    const NoiseSource fast{seed, NoiseRole::FastNoiseZ, ids};
    Eigen::MatrixXd X = model.spec().initial_x.replicate(1, count);
    Eigen::MatrixXd Y = model.spec().initial_y.replicate(1, count);
    Eigen::MatrixXd scratch(n, count);
    path.x[0].middleCols(begin, count) = X;
    path.y[0].middleCols(begin, count) = Y;
    for (Index s = 0; s < macro_steps; ++s) {
      advance_slowfast(model, c, path.times[static_cast<std::size_t>(s)], eps, X, Y, slow, s,
                       fast, s * c.substeps, scratch);
      path.x[static_cast<std::size_t>(s + 1)].middleCols(begin, count) = X;
      path.y[static_cast<std::size_t>(s + 1)].middleCols(begin, count) = Y;
    }
  });
  return path;
}

Trajectory simulate_slowfast(const ValidatedModel& model, double eps, double T, Index macro_steps,
                             std::uint64_t seed, std::uint32_t trajectory_id) {
  const std::uint32_t ids[] = {trajectory_id};
  return extract(simulate_slowfast_ensemble(model, eps, T, macro_steps, seed, ids), 0);
}

EnsemblePath simulate_averaged_ensemble(const ValidatedModel& model, const EnsembleDrift& drift,
                                        std::optional<double> eps, double T, Index macro_steps,
                                        std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const EnsembleOptions& options) {
  check_grid(T, macro_steps);
  if (eps && !(*eps > 0.0)) throw DomainError("simulate_averaged: eps must be positive");
  const Index n = model.dimension();
  const Index E = static_cast<Index>(trajectories.size());
  EnsemblePath path;
  path.seed = seed;
  path.eps = eps.value_or(0.0);
  path.trajectories.assign(trajectories.begin(), trajectories.end());
  path.times = uniform_times(T, macro_steps);
  path.x.assign(path.times.size(), Eigen::MatrixXd(n, E));
  const StepFactors slow = StepFactors::Slow(model, T / static_cast<double>(macro_steps));
  for (Index s = 0; s < macro_steps; ++s) path.slow_noise_steps.push_back(s);

  for_each_chunk(E, options, [&](Index begin, Index count) {
    const auto ids = trajectories.subspan(static_cast<std::size_t>(begin),
                                          static_cast<std::size_t>(count));
    const NoiseSource source{seed, NoiseRole::SlowNoiseL, ids};
    Eigen::MatrixXd X = model.spec().initial_x.replicate(1, count);
    Eigen::MatrixXd scratch(n, count);
    path.x[0].middleCols(begin, count) = X;
    for (Index s = 0; s < macro_steps; ++s) {
      const double t = path.times[static_cast<std::size_t>(s)];
      const Eigen::MatrixXd d = drift(eps ? fast_time(t, *eps) : t, X);
      if (d.rows() != n || d.cols() != count) {
        throw ConfigurationError("simulate_averaged: drift returned the wrong shape");
      }
      if (slow.noisy) source.fill(model.alpha(), s, scratch);
      slow.apply(X, d, scratch);
      path.x[static_cast<std::size_t>(s + 1)].middleCols(begin, count) = X;
    }
  });
  return path;
}

Trajectory simulate_averaged(const ValidatedModel& model, const EnsembleDrift& drift,
                             std::optional<double> eps, double T, Index macro_steps,
                             std::uint64_t seed, std::uint32_t trajectory_id) {
  const std::uint32_t ids[] = {trajectory_id};
  return extract(
      simulate_averaged_ensemble(model, drift, eps, T, macro_steps, seed, ids), 0);
}

FrozenEnsemble simulate_frozen_ensemble(const ValidatedModel& model, double s, double t_end,
                                        const Field& x, const Eigen::MatrixXd& y0,
                                        std::uint64_t seed,
                                        std::span<const std::uint32_t> trajectories,
                                        const FrozenOptions& options) {
  if (!(s <= t_end)) throw DomainError("simulate_frozen: requires s <= t_end");
  if (!(options.dt > 0.0)) throw DomainError("simulate_frozen: dt must be positive");
  require_same_dimension(x, model.B(), "simulate_frozen");
  const Index n = model.dimension();
  const Index E = static_cast<Index>(trajectories.size());
  if (y0.rows() != n || (y0.cols() != 1 && y0.cols() != E)) {
    throw ConfigurationError("simulate_frozen: initial values have the wrong shape");
  }
  const DriftFamily& g = options.drift ? *options.drift : model.G();
  const auto& grid = model.grid();
  const double dt = options.dt;
  const Eigen::MatrixXd nodal_x = grid.to_physical(Eigen::MatrixXd(x.coeffs()));

  auto factors = [&](double h) {
    StepFactors f;
    f.decay = semigroup_factors(model.B(), h).array();
    f.integral = semigroup_integral_factors(model.B(), h).array();
    f.noise = convolution_scales(model.B(), model.gamma(), h, model.alpha()).array();
    f.noisy = !options.noise_free && (f.noise != 0.0).any();
    return f;
  };
  const StepFactors full = factors(dt);

  FrozenEnsemble out;
  Eigen::MatrixXd Y = y0.cols() == E ? y0 : y0.replicate(1, E);
  Eigen::MatrixXd variates(n, E);
  out.times.push_back(s);
  if (options.record_path) out.path.push_back(Y);

  const double tol = 1e-9 * dt;
  double a = s;
  while (a < t_end - tol) {
    double cell = std::round(a / dt);
    if (std::abs(cell * dt - a) > tol) cell = std::floor(a / dt);
    const double b = std::min((cell + 1.0) * dt, t_end);
    const double h = b - a;
    const auto index = static_cast<std::int64_t>(cell);
    const StepFactors partial = std::abs(h - dt) <= tol ? StepFactors{} : factors(h);
    const StepFactors& f = std::abs(h - dt) <= tol ? full : partial;

    const Eigen::MatrixXd drift = eval_drift_nodal(g, a, nodal_x, grid.to_physical(Y), grid);
    if (f.noisy) {
      const NoiseRole role = index >= 0 ? NoiseRole::FastNoiseZ : NoiseRole::FrozenNegativeTimeCopy;
      fill_standard_stable(model.alpha(), seed, role, trajectories,
                           index >= 0 ? index : -index - 1, variates);
    }
    f.apply(Y, drift, variates);
    a = b;
    out.times.push_back(a);
    if (options.record_path) out.path.push_back(Y);
  }
  out.endpoint = std::move(Y);
  return out;
}

FrozenRun simulate_frozen(const ValidatedModel& model, double s, double t_end, const Field& x,
                          const Field& y, std::uint64_t seed, std::uint32_t trajectory_id,
                          const FrozenOptions& options) {
  FrozenOptions opts = options;
  opts.record_path = true;
  const std::uint32_t ids[] = {trajectory_id};
  const FrozenEnsemble e =
      simulate_frozen_ensemble(model, s, t_end, x, Eigen::MatrixXd(y.coeffs()), seed, ids, opts);
  FrozenRun run;
  run.s = s;
  run.x = x;
  run.y = y;
  run.times = e.times;
  for (const auto& m : e.path) run.path.emplace_back(m.col(0));
  return run;
}

std::vector<Eigen::MatrixXd> simulate_auxiliary(const ValidatedModel& model, double delta,
                                                const EnsemblePath& base) {
  if (base.y.empty()) throw ConfigurationError("simulate_auxiliary: base run has no fast path");
  if (!(delta > 0.0)) throw DomainError("simulate_auxiliary: delta must be positive");
  const double dt = base.dt();
  const double ratio = delta / dt;
  const auto block = static_cast<Index>(std::llround(ratio));
  if (block < 1 || std::abs(ratio - static_cast<double>(block)) > 1e-9 * ratio) {
    throw ConfigurationError("simulate_auxiliary: delta = " + std::to_string(delta) +
                             " is not a multiple of the macro step " + std::to_string(dt));
  }
  const Index steps = static_cast<Index>(base.times.size()) - 1;
  const Index E = base.size();
  const double eps = base.eps;
  const SlowFastFactors c(model, eps, dt);
  const auto& grid = model.grid();
  std::vector<Eigen::MatrixXd> hat(base.times.size(), Eigen::MatrixXd(model.dimension(), E));
  const std::span<const std::uint32_t> all(base.trajectories);

  // Same column chunking as the base run so that identical inputs give
  // bitwise identical outputs.
  const EnsembleOptions options;
  for_each_chunk(E, options, [&](Index begin, Index count) {
    const NoiseSource fast{base.seed, NoiseRole::FastNoiseZ,
                           all.subspan(static_cast<std::size_t>(begin),
                                       static_cast<std::size_t>(count))};
    Eigen::MatrixXd Yhat;
    Eigen::MatrixXd nodal_x;
    Eigen::MatrixXd scratch(model.dimension(), count);
    for (Index s = 0; s <= steps; ++s) {
      if (s % block == 0) {
        Yhat = base.y[static_cast<std::size_t>(s)].middleCols(begin, count);
        const Eigen::MatrixXd x0 = base.x[static_cast<std::size_t>(s)].middleCols(begin, count);
        nodal_x = grid.to_physical(x0);
      }
      hat[static_cast<std::size_t>(s)].middleCols(begin, count) = Yhat;
      if (s == steps) break;
      const double t = base.times[static_cast<std::size_t>(s)];
      for (int j = 0; j < c.substeps; ++j) {
        const double tj = j == 0 ? t : t + j * c.h;
        const Eigen::MatrixXd drift =
            eval_drift_nodal(model.G(), fast_time(tj, eps), nodal_x, grid.to_physical(Yhat), grid);
        if (c.fast.noisy) fast.fill(model.alpha(), s * c.substeps + j, scratch);
        c.fast.apply(Yhat, drift, scratch);
      }
    }
  });
  return hat;
}

}  // namespace stablescale
