#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "stablescale/averaging.hpp"

using namespace stablescale;

namespace {

ModelPtr heat(Index n) { return ValidatedModel::create(ModelSpec::HeatEquation(n)); }

ModelSpec relaxing_spec(Index n, double rate) {
  ModelSpec spec = ModelSpec::HeatEquation(n);
  spec.drift_F.kind = DriftKind::Affine;
  spec.drift_F.amplitude = 0.0;
  spec.drift_F.period.reset();
  spec.drift_F.with_tight_constants();
  spec.drift_G.kind = DriftKind::ExponentialRelaxation;
  spec.drift_G.period.reset();
  spec.drift_G.amplitude = 0.6;
  spec.drift_G.rate = rate;
  spec.drift_G.with_tight_constants();
  return spec;
}

ModelSpec time_independent_spec(Index n) {
  ModelSpec spec = ModelSpec::HeatEquation(n);
  for (DriftFamily* d : {&spec.drift_F, &spec.drift_G}) {
    d->kind = DriftKind::Affine;
    d->amplitude = 0.0;
    d->period.reset();
    d->with_tight_constants();
  }
  return spec;
}

double combined(const DriftEstimate& a, const DriftEstimate& b) {
  return std::sqrt(a.std_error.squaredNorm() + b.std_error.squaredNorm());
}

/// RK4 for the frozen mean m' = -B m + P G(t, x, m) from m(s) = m0.
Eigen::VectorXd mean_ode(const ValidatedModel& model, double s, double t, const Field& x,
                         Eigen::VectorXd m, int steps) {
  const Eigen::ArrayXd beta = model.B().eigenvalues().array();
  auto rhs = [&](double u, const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return (-beta * v.array()).matrix() + eval_drift(model.G(), u, x, Field(v), model.grid()).coeffs();
  };
  const double h = (t - s) / steps;
  for (int i = 0; i < steps; ++i) {
    const double u = s + i * h;
    const Eigen::VectorXd k1 = rhs(u, m);
    const Eigen::VectorXd k2 = rhs(u + 0.5 * h, m + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(u + 0.5 * h, m + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(u + h, m + h * k3);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return m;
}

/// Window average of I(s) = int_0^s e^{-beta (s-u)} e^{-u} du, maximized by bisection on
/// I(t + T) = I(t).
double phi2_tilde_closed_form(double beta, double T) {
  auto I = [beta](double s) {
    return beta == 1.0 ? s * std::exp(-s) : (std::exp(-s) - std::exp(-beta * s)) / (beta - 1.0);
  };
  auto J = [beta](double t) {
    return beta == 1.0 ? 1.0 - (1.0 + t) * std::exp(-t)
                       : ((1.0 - std::exp(-t)) - (1.0 - std::exp(-beta * t)) / beta) / (beta - 1.0);
  };
  double lo = 0.0, hi = 60.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (I(mid + T) - I(mid) > 0.0 ? lo : hi) = mid;
  }
  return (J(lo + T) - J(lo)) / T;
}

}  // namespace

TEST(EvolutionDrift, ExactWhenFIgnoresY) {
  ModelSpec spec = ModelSpec::HeatEquation(4);
  spec.drift_F.coeff_y = 0.0;
  spec.drift_F.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const Field x = model->initial_x();
  for (Index E : {1, 7}) {
    const DriftEstimate e = estimate_evolution_drift(*model, 0.3, x, E, 0.1, 1);
    EXPECT_EQ(e.value.coeffs(), eval_drift(model->F(), 0.3, x, Field::Zero(4), model->grid()).coeffs());
    EXPECT_EQ(e.std_error, Eigen::VectorXd::Zero(4));
  }
}

TEST(EvolutionDrift, DomainErrors) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  EXPECT_THROW(estimate_evolution_drift(*model, 0.0, x, 0, 1.0, 1), DomainError);
  EXPECT_THROW(estimate_evolution_drift(*model, 0.0, x, 10, 0.0, 1), DomainError);
  FrozenSampling bad;
  bad.warm_start = -1.0;
  EXPECT_THROW(estimate_evolution_drift(*model, 0.0, x, 10, 1.0, 1, bad), DomainError);
  EXPECT_THROW(estimate_evolution_drift(*model, 0.0, Field::Zero(3), 10, 1.0, 1), ConfigurationError);
}

TEST(EvolutionDrift, DefaultBurnIn) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  EXPECT_NEAR(default_burn_in(*model, x), 2.0 * std::log(100.0 * (1.0 + x.norm())) / 0.5, 1e-12);
}

TEST(EvolutionDrift, MatchesOracle) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  for (double t : {0.1, 0.35}) {
    const DriftEstimate e = estimate_evolution_drift(*model, t, x, 2000, 14.0, 3);
    const Field oracle = analytic_affine_drift_oracle(*model, t, x);
    EXPECT_LE((e.value - oracle).norm(), 3.0 * e.combined_stderr()) << t;
    EXPECT_EQ(e.samples, 2000);
    EXPECT_LE((e.median_of_means - oracle.coeffs()).norm(), 6.0 * e.combined_stderr());
  }
}

TEST(EvolutionDrift, BurnInSaturation) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  const double burn = 10.0 / model->spectral_gap();
  const DriftEstimate a = estimate_evolution_drift(*model, 0.2, x, 400, burn, 4);
  const DriftEstimate b = estimate_evolution_drift(*model, 0.2, x, 400, 2.0 * burn, 4);
  EXPECT_LE((a.value - b.value).norm(), a.combined_stderr());
}

TEST(EvolutionDrift, IndependentOfInitialY) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  FrozenSampling random_start;
  random_start.initial_y = Eigen::Vector4d(3.0, -2.0, 1.0, 0.5);
  const double burn = 10.0 / model->spectral_gap();
  const DriftEstimate a = estimate_evolution_drift(*model, 0.2, x, 400, burn, 5);
  const DriftEstimate b = estimate_evolution_drift(*model, 0.2, x, 400, burn, 5, random_start);
  EXPECT_LE((a.value - b.value).norm(), combined(a, b));
  const DriftEstimate c = estimate_evolution_drift(*model, 0.2, x, 400, burn, 6, random_start);
  EXPECT_LE((a.value - c.value).norm(), 3.0 * combined(a, c));
}

TEST(EvolutionDrift, WarmStartAgreesWithLongBurnIn) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  FrozenSampling warm;
  warm.warm_start = 20.0;
  const DriftEstimate a = estimate_evolution_drift(*model, 0.4, x, 1000, 5.0, 7, warm);
  const DriftEstimate b = estimate_evolution_drift(*model, 0.4, x, 1000, 25.0, 8);
  EXPECT_LE((a.value - b.value).norm(), 3.0 * combined(a, b));
}

TEST(EvolutionDrift, ThreadCountDoesNotChangeResult) {
  const auto model = heat(4);
  FrozenSampling threaded;
  threaded.threads = 3;
  const DriftEstimate a = estimate_evolution_drift(*model, 0.2, model->initial_x(), 200, 3.0, 9);
  const DriftEstimate b =
      estimate_evolution_drift(*model, 0.2, model->initial_x(), 200, 3.0, 9, threaded);
  EXPECT_EQ(a.value.coeffs(), b.value.coeffs());
}

TEST(AffineOracle, ZeroForcingGivesZeroMean) {
  ModelSpec spec = ModelSpec::HeatEquation(6);
  spec.drift_G.offset = 0.0;
  spec.drift_G.amplitude = 0.0;
  spec.drift_G.coeff_x = 0.0;
  spec.drift_G.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const Field x = model->initial_x();
  for (double t : {0.0, 0.3}) {
    EXPECT_LE((analytic_affine_drift_oracle(*model, t, x) -
               eval_drift(model->F(), t, x, Field::Zero(6), model->grid())).norm(),
              1e-14);
  }
}

TEST(AffineOracle, ConstantOffsetStationaryMean) {
  ModelSpec spec = time_independent_spec(6);
  spec.drift_G.coeff_y = 0.0;
  spec.drift_G.offset = 0.8;
  spec.drift_G.with_tight_constants();
  spec.drift_F.coeff_x = 0.0;
  spec.drift_F.coeff_y = 1.0;
  spec.drift_F.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const Field x(Eigen::VectorXd::LinSpaced(6, 1.0, -1.0));
  const Eigen::VectorXd u = model->grid().unit_projection();
  const Field got = AffineDriftOracle(*model).evolution(0.0, x);
  for (Index k = 0; k < 6; ++k) {
    const double beta = double((k + 1) * (k + 1));
    EXPECT_NEAR(got[k], (0.8 * u[k] + 0.3 * x[k]) / beta, 1e-14);
  }
}

TEST(AffineOracle, SinusoidalParticularSolution) {
  ModelSpec spec = ModelSpec::HeatEquation(6);
  spec.drift_G.offset = 0.0;
  spec.drift_G.coeff_x = 0.0;
  spec.drift_G.with_tight_constants();
  spec.drift_F.kind = DriftKind::Affine;
  spec.drift_F.amplitude = 0.0;
  spec.drift_F.coeff_x = 0.0;
  spec.drift_F.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const Eigen::VectorXd u = model->grid().unit_projection();
  const double omega = 4.0 * std::numbers::pi;
  for (double t : {-0.3, 0.0, 0.17, 2.6}) {
    const Field got = AffineDriftOracle(*model).evolution(t, model->initial_x());
    for (Index k = 0; k < 6; ++k) {
      const double kappa = double((k + 1) * (k + 1)) - 0.5;
      const std::complex<double> z = std::exp(std::complex<double>(0.0, omega * t)) /
                                     std::complex<double>(kappa, omega);
      EXPECT_NEAR(got[k], z.imag() * u[k], 1e-13) << t << " " << k;
    }
  }
}

TEST(AffineOracle, MatchesMeanOdeFromTheFarPast) {
  for (const ModelSpec& spec : {ModelSpec::HeatEquation(5), relaxing_spec(5, 1.0), relaxing_spec(5, 0.5)}) {
    const auto model = ValidatedModel::create(spec);
    const AffineDriftOracle oracle(*model);
    const Field x(Eigen::VectorXd::LinSpaced(5, 0.5, -0.2));
    const Eigen::MatrixXd xm = x.coeffs();
    for (double t : {-0.4, 0.0, 0.3, 1.7}) {
      const Eigen::VectorXd ode = mean_ode(*model, t - 60.0, t, x, Eigen::VectorXd::Zero(5), 120000);
      EXPECT_LE((oracle.frozen_mean(t, xm).col(0) - ode).norm(), 1e-9) << t;
    }
  }
}

TEST(AffineOracle, EvolutionProperty) {
  for (const ModelSpec& spec : {ModelSpec::HeatEquation(5), relaxing_spec(5, 2.0)}) {
    const auto model = ValidatedModel::create(spec);
    const AffineDriftOracle oracle(*model);
    const Field x = model->initial_x();
    const Eigen::MatrixXd xm = x.coeffs();
    for (auto [s, t] : {std::pair{-1.0, 0.0}, {0.2, 0.9}, {-0.5, 2.0}}) {
      const Eigen::VectorXd flowed = mean_ode(*model, s, t, x, oracle.frozen_mean(s, xm).col(0), 20000);
      EXPECT_LE((oracle.frozen_mean(t, xm).col(0) - flowed).norm(), 1e-10);
    }
  }
}

TEST(AffineOracle, MonteCarloEvolutionProperty) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  const AffineDriftOracle oracle(*model);
  for (auto [s, t] : {std::pair{-0.5, 0.0}, {0.0, 0.25}, {0.25, 0.6}}) {
    FrozenSampling from_s;
    from_s.initial_y = oracle.frozen_mean(s, Eigen::MatrixXd(x.coeffs())).col(0);
    const DriftEstimate e = estimate_evolution_drift(*model, t, x, 1000, t - s, 10, from_s);
    EXPECT_LE((e.value - oracle.evolution(t, x)).norm(), 3.0 * e.combined_stderr());
  }
}

TEST(AffineOracle, RejectsSaturatingFastDrift) {
  ModelSpec spec = ModelSpec::HeatEquation(4);
  spec.drift_G.kind = DriftKind::SaturatingNonlinear;
  EXPECT_THROW(AffineDriftOracle(*ValidatedModel::create(spec)), UnsupportedError);
}

TEST(PeriodicDrift, Period) {
  EXPECT_EQ(averaging_period(*heat(4)).tau, Rational(1));
  EXPECT_EQ(averaging_period(*ValidatedModel::create(time_independent_spec(4))).tau, Rational(1));
  EXPECT_THROW(averaging_period(*ValidatedModel::create(relaxing_spec(4, 1.0))), ConfigurationError);
}

TEST(PeriodicDrift, ExactForStaticYIndependentF) {
  ModelSpec spec = ModelSpec::HeatEquation(4);
  spec.drift_F = DriftFamily{};
  spec.drift_F.offset = 1.0;
  spec.drift_F.coeff_x = -0.4;
  spec.drift_F.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const Field x = model->initial_x();
  const DriftEstimate e = periodic_average_drift(*model, x, 5, 3, 1.0, 1);
  EXPECT_LE((e.value - eval_drift(model->F(), 0.0, x, Field::Zero(4), model->grid())).norm(), 1e-15);
  EXPECT_EQ(e.std_error.norm(), 0.0);
}

TEST(PeriodicDrift, OracleQuadratureRefinement) {
  const auto model = heat(6);
  const AffineDriftOracle oracle(*model);
  const Field x = model->initial_x();
  EXPECT_LE((oracle.periodic(x, 16) - oracle.periodic(x, 32)).norm(), 1e-12);
}

TEST(PeriodicDrift, MonteCarloAgreesWithOracleAndShift) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  FrozenSampling warm;
  warm.warm_start = 20.0;
  const DriftEstimate a = periodic_average_drift(*model, x, 4, 500, 5.0, 11, 0.0, warm);
  const DriftEstimate b = periodic_average_drift(*model, x, 4, 500, 5.0, 12, 0.5, warm);
  const DriftEstimate c = periodic_average_drift(*model, x, 8, 250, 5.0, 13, 0.0, warm);
  const Field oracle = AffineDriftOracle(*model).periodic(x, 16);
  EXPECT_LE((a.value - oracle).norm(), 3.0 * a.combined_stderr());
  EXPECT_LE((a.value - b.value).norm(), 3.0 * combined(a, b));
  EXPECT_LE((a.value - c.value).norm(), 3.0 * combined(a, c));
  EXPECT_EQ(a.samples, 2000);
}

TEST(PeriodicDrift, PeriodicityInTime) {
  const auto model = heat(4);
  const Field x = model->initial_x();
  const AffineDriftOracle oracle(*model);
  FrozenSampling warm;
  warm.warm_start = 20.0;
  for (double t : {0.1, 0.3}) {
    EXPECT_LE((oracle.evolution(t, x) - oracle.evolution(t + 1.0, x)).norm(), 1e-12);
    const DriftEstimate a = estimate_evolution_drift(*model, t, x, 500, 5.0, 14, warm);
    const DriftEstimate b = estimate_evolution_drift(*model, t + 1.0, x, 500, 5.0, 15, warm);
    EXPECT_LE((a.value - b.value).norm(), 3.0 * combined(a, b));
  }
}

TEST(AsymptoticDrift, ExactWhenTargetIgnoresY) {
  ModelSpec spec = relaxing_spec(4, 1.0);
  spec.drift_F.coeff_y = 0.0;
  spec.drift_F.with_tight_constants();
  const auto model = ValidatedModel::create(spec);
  const DriftEstimate e = asymptotic_average_drift(*model, model->initial_x(), 10.0, 1.0, 1);
  EXPECT_EQ(e.std_error.norm(), 0.0);
  EXPECT_LE((e.value - eval_drift(*model->F_tilde(), 0.0, model->initial_x(), Field::Zero(4),
                                  model->grid())).norm(), 1e-15);
}

TEST(AsymptoticDrift, MatchesOracleAndIsSeedStable) {
  const auto model = ValidatedModel::create(relaxing_spec(4, 1.0));
  const Field x = model->initial_x();
  const DriftEstimate a = asymptotic_average_drift(*model, x, 400.0, 20.0, 1);
  const DriftEstimate b = asymptotic_average_drift(*model, x, 400.0, 20.0, 2);
  const Field oracle = AffineDriftOracle(*model).asymptotic(x);
  EXPECT_LE((a.value - oracle).norm(), 3.0 * a.combined_stderr());
  EXPECT_LE((a.value - b.value).norm(), 3.0 * combined(a, b));
  const Eigen::VectorXd u = model->grid().unit_projection();
  for (Index k = 0; k < 4; ++k) {
    const double kappa = double((k + 1) * (k + 1)) - 0.5;
    const double mean_y = (0.5 * u[k] + 0.3 * x[k]) / kappa;
    EXPECT_NEAR(oracle[k], -0.5 * x[k] + mean_y, 1e-14);
  }
}

TEST(AsymptoticDrift, RequiresTargets) {
  EXPECT_THROW(asymptotic_average_drift(*heat(4), Field::Zero(4), 10.0, 1.0, 1), ConfigurationError);
}

TEST(AsymptoticDrift, ConsistentWithEvolutionForStaticCoefficients) {
  const auto model = ValidatedModel::create(time_independent_spec(4));
  const Field x = model->initial_x();
  FrozenSampling warm;
  warm.warm_start = 20.0;
  const DriftEstimate a = asymptotic_average_drift(*model, x, 400.0, 20.0, 3);
  const DriftEstimate b = estimate_evolution_drift(*model, 0.7, x, 1000, 5.0, 4, warm);
  EXPECT_LE((a.value - b.value).norm(), 3.0 * combined(a, b));
}

TEST(AveragedDrift, LipschitzTransfer) {
  const auto model = heat(6);
  const AffineDriftOracle oracle(*model);
  const DriftFamily& f = model->F();
  const DriftFamily& g = model->G();
  const double C = f.lipschitz_x + f.lipschitz_y * g.lipschitz_x / model->spectral_gap();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> time(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(6), b(6);
    for (Index k = 0; k < 6; ++k) {
      a[k] = normal(rng);
      b[k] = normal(rng);
    }
    const double t = time(rng);
    EXPECT_LE((oracle.evolution(t, Field(a)) - oracle.evolution(t, Field(b))).norm(),
              C * (a - b).norm() * (1.0 + 1e-12));
  }
  FrozenSampling warm;
  warm.warm_start = 20.0;
  const auto small = heat(4);
  for (int i = 0; i < 3; ++i) {
    const Field x1(Eigen::Vector4d::Random()), x2(Eigen::Vector4d::Random());
    const DriftEstimate e1 = estimate_evolution_drift(*small, 0.3, x1, 300, 5.0, 20 + i, warm);
    const DriftEstimate e2 = estimate_evolution_drift(*small, 0.3, x2, 300, 5.0, 40 + i, warm);
    EXPECT_LE((e1.value - e2.value).norm(), C * (x1 - x2).norm() + 3.0 * combined(e1, e2));
  }
}

TEST(AveragedDrift, KindsAndNames) {
  for (auto k : {ReferenceKind::EvolutionAveraged, ReferenceKind::PeriodicAveraged,
                 ReferenceKind::AsymptoticAveraged}) {
    EXPECT_EQ(parse_reference_kind(to_string(k)), k);
  }
  for (auto e : {DriftEstimator::AnalyticOracle, DriftEstimator::MonteCarlo}) {
    EXPECT_EQ(parse_drift_estimator(to_string(e)), e);
  }
  EXPECT_THROW(parse_reference_kind("mean"), ConfigurationError);
  EXPECT_THROW(parse_drift_estimator("exact"), ConfigurationError);
  EXPECT_THROW(AveragedDrift(heat(4), ReferenceKind::AsymptoticAveraged, {}), ConfigurationError);
  EXPECT_THROW(AveragedDrift(ValidatedModel::create(relaxing_spec(4, 1.0)),
                             ReferenceKind::PeriodicAveraged, {}),
               ConfigurationError);
  EXPECT_TRUE(AveragedDrift(heat(4), ReferenceKind::EvolutionAveraged, {}).scaled_time());
  EXPECT_FALSE(AveragedDrift(heat(4), ReferenceKind::PeriodicAveraged, {}).scaled_time());
}

TEST(AveragedDrift, OraclePlugIn) {
  const auto model = heat(4);
  const AveragedDrift drift(model, ReferenceKind::EvolutionAveraged, {});
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  const Eigen::MatrixXd out = drift.as_ensemble_drift()(0.4, x);
  EXPECT_LE((out - AffineDriftOracle(*model).evolution(0.4, x)).norm(), 1e-15);
}

TEST(AveragedDrift, MonteCarloCacheIsReproducible) {
  const auto model = heat(4);
  AveragedDriftSettings settings;
  settings.estimator = DriftEstimator::MonteCarlo;
  settings.ensemble_size = 64;
  settings.burn_in = 2.0;
  settings.cache = true;
  settings.seed = 3;
  const AveragedDrift drift(model, ReferenceKind::EvolutionAveraged, settings);
  const Eigen::MatrixXd x = model->initial_x().coeffs();
  const Eigen::MatrixXd a = drift(0.25, x);
  const Eigen::MatrixXd b = drift(0.25, x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(drift.cache_size(), 1u);
  const AveragedDrift fresh(model, ReferenceKind::EvolutionAveraged, settings);
  EXPECT_EQ(fresh(0.25, x), a);
}

TEST(Phi2Tilde, ZeroProfile) {
  EXPECT_EQ(phi2_tilde([](double) { return 0.0; }, 1.0, 3.0), 0.0);
}

TEST(Phi2Tilde, ClosedFormOracle) {
  const auto phi = [](double u) { return std::exp(-u); };
  for (double beta : {4.0, 1.0, 0.5}) {
    for (double T : {0.5, 1.0, 5.0}) {
      const double want = phi2_tilde_closed_form(beta, T);
      EXPECT_NEAR(phi2_tilde(phi, beta, T), want, 1e-5 * want) << beta << " " << T;
    }
  }
}

TEST(Phi2Tilde, SupremumIsInterior) {
  const double T = 1.0, beta = 4.0;
  const double at_zero = ((1.0 - std::exp(-T)) - (1.0 - std::exp(-beta * T)) / beta) / (beta - 1.0) / T;
  EXPECT_GT(phi2_tilde_closed_form(beta, T), at_zero * 1.01);
}

TEST(Phi2Tilde, DecreasesToZero) {
  const auto model = ValidatedModel::create(relaxing_spec(4, 1.0));
  const double a = phi2_tilde(*model, 1.0), b = phi2_tilde(*model, 10.0), c = phi2_tilde(*model, 100.0);
  EXPECT_GT(a, b);
  EXPECT_GT(b, c);
  EXPECT_LT(c, 0.1 * a);
  EXPECT_THROW(phi2_tilde(*heat(4), 1.0), ConfigurationError);
  EXPECT_THROW(phi2_tilde([](double) { return 1.0; }, 1.0, 0.0), DomainError);
}
