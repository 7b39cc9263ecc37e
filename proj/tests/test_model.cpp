#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stablescale/collocation.hpp"
#include "stablescale/model.hpp"
#include "stablescale/rational.hpp"

using namespace stablescale;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (Index k = 0; k < n; ++k) v[k] = normal(rng);
  return v;
}

DriftFamily saturating() {
  DriftFamily f;
  f.kind = DriftKind::SaturatingNonlinear;
  f.offset = 0.2;
  f.coeff_x = 0.7;
  f.coeff_y = -0.4;
  f.amplitude = 0.3;
  f.period = Rational(1, 3);
  return f.with_tight_constants();
}

DriftFamily relaxation() {
  DriftFamily g;
  g.kind = DriftKind::ExponentialRelaxation;
  g.offset = 0.5;
  g.coeff_x = 0.3;
  g.coeff_y = 0.5;
  g.amplitude = 0.8;
  g.rate = 1.5;
  return g.with_tight_constants();
}

}  // namespace

TEST(Validate, HeatEquationIsValid) {
  const ValidationReport r = validate(ModelSpec::HeatEquation(16));
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.tails.size(), 2u);
  for (const auto& t : r.tails) {
    EXPECT_TRUE(t.symbolic);
    EXPECT_TRUE(t.convergent);
    EXPECT_GT(t.tail_bound, 0.0);
  }
  EXPECT_NEAR(r.tails[0].decay_exponent, -2.0 * (1.0 - 0.375), 1e-15);
  EXPECT_NEAR(r.tails[1].decay_exponent, -2.0, 1e-15);
}

TEST(Validate, SpectralGapBoundary) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  spec.drift_G.coeff_y = 1.0;
  spec.drift_G.with_tight_constants();
  const ValidationReport r = validate(spec);
  ASSERT_TRUE(r.has("A3.spectral_gap"));
  bool found = false;
  for (const auto& v : r.violations) found |= v.message.find("spectral gap violated") != std::string::npos;
  EXPECT_TRUE(found);
  EXPECT_THROW(ValidatedModel::create(spec), ValidationFailure);
}

TEST(Validate, DivergentSlowTail) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  spec.theta = 0.8;
  const ValidationReport r = validate(spec);
  ASSERT_TRUE(r.has("A2.slow_tail_divergent"));
  bool found = false;
  for (const auto& v : r.violations) {
    found |= v.message.find("Assumption A2 tail divergent") != std::string::npos;
  }
  EXPECT_TRUE(found);
}

TEST(Validate, ThetaAdmissibilityEdge) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  spec.theta = 1.0 / 1.5 - 1e-3;
  EXPECT_TRUE(validate(spec).ok());
  spec.theta = 1.0 / 1.5 + 1e-3;
  EXPECT_TRUE(validate(spec).has("A2.slow_tail_divergent"));
}

TEST(Validate, DistinctNamedViolations) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  spec.alpha = 2.5;
  spec.theta = 3.0;
  spec.eigen_B = Sequence::Explicit(Eigen::VectorXd::LinSpaced(8, 3.0, 1.0));
  spec.drift_F.lipschitz_x = 0.0;
  spec.drift_G.period.reset();
  const ValidationReport r = validate(spec);
  for (const char* code : {"alpha_range", "A2.theta_range", "A1.eigenvalues",
                           "A3.lipschitz_declaration", "A4.period"}) {
    EXPECT_TRUE(r.has(code)) << code;
  }
}

TEST(Validate, ExplicitSequencesAreNotedNotDecided) {
  ModelSpec spec = ModelSpec::HeatEquation(4);
  spec.rho = Sequence::Explicit(Eigen::Vector4d(1, 1, 1, 1));
  const ValidationReport r = validate(spec);
  EXPECT_TRUE(r.ok());
  EXPECT_FALSE(r.tails[0].symbolic);
  EXPECT_FALSE(r.notes.empty());
}

TEST(Validate, ZeroNoiseIsAccepted) {
  ModelSpec spec = ModelSpec::HeatEquation(4);
  spec.rho = Sequence::Analytic(4, {0.0, 0.0});
  spec.gamma = Sequence::Analytic(4, {0.0, 0.0});
  EXPECT_TRUE(validate(spec).ok());
}

TEST(Validate, GridTooCoarse) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  spec.collocation_nodes = 7;
  EXPECT_TRUE(validate(spec).has("grid"));
}

TEST(CommonPeriod, Integers) {
  const CommonPeriod c = common_period(Rational(2), Rational(3));
  EXPECT_EQ(c.tau, Rational(6));
  EXPECT_EQ(c.m1, 2);
  EXPECT_EQ(c.m2, 3);
}

TEST(CommonPeriod, Fractions) {
  const CommonPeriod c = common_period(Rational(1, 2), Rational(1, 3));
  EXPECT_EQ(c.tau, Rational(1));
  EXPECT_EQ(c.m1, 3);
  EXPECT_EQ(c.m2, 2);
}

TEST(CommonPeriod, EqualPeriods) {
  const CommonPeriod c = common_period(Rational(5, 7), Rational(5, 7));
  EXPECT_EQ(c.tau, Rational(5, 7));
  EXPECT_EQ(c.m1, 1);
  EXPECT_EQ(c.m2, 1);
}

TEST(CommonPeriod, DefiningRelation) {
  for (auto [a, b] : {std::pair{Rational(3, 4), Rational(5, 6)}, {Rational(7), Rational(2, 9)}}) {
    const CommonPeriod c = common_period(a, b);
    EXPECT_EQ(c.tau, Rational(c.m2) * a);
    EXPECT_EQ(c.tau, Rational(c.m1) * b);
  }
}

TEST(Rational, Parse) {
  EXPECT_EQ(Rational::parse("3/6"), Rational(1, 2));
  EXPECT_EQ(Rational::parse("2"), Rational(2));
  EXPECT_EQ(Rational::parse("0.25"), Rational(1, 4));
  EXPECT_EQ(Rational(4, 6).to_string(), "2/3");
  EXPECT_THROW(Rational::parse(""), ConfigurationError);
  EXPECT_THROW(Rational::parse("a/b"), ConfigurationError);
  EXPECT_THROW(Rational(1, 0), DomainError);
}

TEST(CollocationGrid, RoundTripIsIdentity) {
  std::mt19937_64 rng(1);
  for (auto [n, m] : {std::pair<Index, Index>{8, 17}, {16, 64}, {16, 16}}) {
    const CollocationGrid grid(n, m);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Random(n, 5);
    EXPECT_LE((grid.to_spectral(grid.to_physical(c)) - c).norm(), 1e-10) << n << " " << m;
  }
}

TEST(CollocationGrid, ProjectionIsNonexpansive) {
  const CollocationGrid grid(8, 32);
  std::mt19937_64 rng(2);
  const double w = std::numbers::pi / 33.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd nodal = random_vector(rng, 32);
    EXPECT_LE(grid.to_spectral(nodal).norm(), std::sqrt(w) * nodal.norm() * (1.0 + 1e-12));
  }
}

TEST(CollocationGrid, BasisValues) {
  const CollocationGrid grid(3, 12);
  for (Index j = 0; j < 12; ++j) {
    const double xi = double(j + 1) * std::numbers::pi / 13.0;
    EXPECT_NEAR(grid.points()[j], xi, 1e-15);
    for (Index k = 0; k < 3; ++k) {
      EXPECT_NEAR(grid.synthesis()(j, k), std::sqrt(2.0 / std::numbers::pi) * std::sin(double(k + 1) * xi), 1e-14);
    }
  }
}

TEST(CollocationGrid, UnitProjectionClosedForm) {
  const Index n = 16, m = 64;
  const CollocationGrid grid(n, m);
  const double c = std::sqrt(2.0 / std::numbers::pi);
  const double h = std::numbers::pi / double(m + 1);
  for (Index k = 1; k <= n; ++k) {
    const double got = grid.unit_projection()[k - 1];
    if (k % 2 == 0) {
      EXPECT_NEAR(got, 0.0, 1e-13);
      continue;
    }
    EXPECT_NEAR(got, c * h / std::tan(0.5 * double(k) * h), 1e-13);
    const double analytic = 2.0 * c / double(k);
    const double quadrature = c * double(k) * h * h / 6.0;
    EXPECT_NEAR(got, analytic, 1.01 * quadrature + 1e-12);
  }
}

TEST(CollocationGrid, RejectsTooFewNodes) {
  EXPECT_THROW(CollocationGrid(8, 7), ConfigurationError);
}

TEST(EvalDrift, AffineIsTheLinearMap) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(8));
  DriftFamily f;
  f.coeff_x = 1.7;
  f.coeff_y = -0.6;
  std::mt19937_64 rng(3);
  const Field x = Field::Basis(8, 0);
  const Field y(random_vector(rng, 8));
  const Field out = eval_drift(f, 0.3, x, y, model->grid());
  EXPECT_LE((out - (1.7 * x + (-0.6) * y)).norm(), 1e-12);
}

TEST(EvalDrift, ConstantProjectsOne) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(16));
  DriftFamily f;
  f.offset = 2.5;
  const Field out = eval_drift(f, 0.0, Field::Zero(16), Field::Zero(16), model->grid());
  const double c = std::sqrt(2.0 / std::numbers::pi);
  const double h = std::numbers::pi / 65.0;
  for (Index k = 1; k <= 16; ++k) {
    const double analytic = k % 2 ? 2.5 * 2.0 * c / double(k) : 0.0;
    EXPECT_NEAR(out[k - 1], analytic, 2.5 * 1.01 * c * double(k) * h * h / 6.0 + 1e-12);
  }
}

TEST(EvalDrift, PeriodicInTime) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(8));
  std::mt19937_64 rng(4);
  const Field x(random_vector(rng, 8)), y(random_vector(rng, 8));
  for (const DriftFamily& f : {model->F(), model->G(), saturating()}) {
    const double tau = f.period->to_double();
    for (double t : {0.0, 0.13, 0.77, 5.4}) {
      EXPECT_LE((eval_drift(f, t, x, y, model->grid()) - eval_drift(f, t + tau, x, y, model->grid())).norm(),
                1e-12);
    }
  }
}

TEST(EvalDrift, ColumnwiseMatchesFieldwise) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(8));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 1);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(8, 3);
  const Eigen::MatrixXd all = eval_drift(saturating(), 0.4, x, y, model->grid());
  for (Index e = 0; e < 3; ++e) {
    const Field one = eval_drift(saturating(), 0.4, Field(x.col(0)), Field(y.col(e)), model->grid());
    EXPECT_LE((all.col(e) - one.coeffs()).norm(), 1e-13);
  }
}

TEST(EvalDrift, DimensionMismatch) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(8));
  EXPECT_THROW(eval_drift(model->F(), 0.0, Field::Zero(7), Field::Zero(8), model->grid()),
               ConfigurationError);
}

TEST(DriftFamily, LipschitzAudit) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(12));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> time(-3.0, 3.0);
  for (const DriftFamily& g : {model->G(), saturating(), relaxation()}) {
    for (int i = 0; i < 1000; ++i) {
      const double t = time(rng);
      const Field x1(random_vector(rng, 12, 2.0)), x2(random_vector(rng, 12, 2.0));
      const Field y1(random_vector(rng, 12, 2.0)), y2(random_vector(rng, 12, 2.0));
      const double diff = (eval_drift(g, t, x1, y1, model->grid()) -
                           eval_drift(g, t, x2, y2, model->grid())).norm();
      EXPECT_LE(diff, (g.lipschitz_x * (x1 - x2).norm() + g.lipschitz_y * (y1 - y2).norm()) *
                          (1.0 + 1e-12));
    }
  }
}

TEST(DriftFamily, AsymptoticAudit) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(12));
  const DriftFamily g = relaxation();
  const DriftFamily target = *g.pointwise_target();
  EXPECT_TRUE(target.time_independent());
  std::mt19937_64 rng(6);
  for (double T : {0.0, 0.5, 2.0, 10.0}) {
    for (int i = 0; i < 100; ++i) {
      const Field x(random_vector(rng, 12)), y(random_vector(rng, 12));
      const double diff = (eval_drift(g, T, x, y, model->grid()) -
                           eval_drift(target, T, x, y, model->grid())).norm();
      EXPECT_LE(diff, g.pointwise_profile(T) * (1.0 + x.norm() + y.norm()) * (1.0 + 1e-12));
    }
  }
  EXPECT_GT(g.pointwise_profile(1.0), g.pointwise_profile(2.0));
}

TEST(DriftFamily, AveragingProfileBoundsWindowAverages) {
  const auto model = ValidatedModel::create(ModelSpec::HeatEquation(8));
  for (const DriftFamily& f : {model->F(), relaxation()}) {
    for (double T : {0.3, 1.0, 4.0}) {
      for (double t0 : {0.0, 0.1, 0.45, 2.0}) {
        const int n = 2000;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += f.time_term(t0 + (j + 0.5) * T / n) / n;
        const double window = std::abs(acc) * std::sqrt(std::numbers::pi);
        EXPECT_LE(window, f.averaging_profile(T) * (1.0 + 1e-6) + 1e-12) << T << " " << t0;
      }
    }
  }
}

TEST(DriftFamily, NegativeTimesUseTheSameFormula) {
  const DriftFamily g = relaxation();
  EXPECT_DOUBLE_EQ(g.time_term(-2.0), g.time_term(2.0));
  const DriftFamily f = saturating();
  EXPECT_NEAR(f.time_term(-0.1), f.time_term(-0.1 + 1.0), 1e-12);
}

TEST(DriftFamily, KindNames) {
  for (DriftKind k : {DriftKind::Affine, DriftKind::SinusoidalTime, DriftKind::SaturatingNonlinear,
                      DriftKind::ExponentialRelaxation}) {
    EXPECT_EQ(parse_drift_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_drift_kind("quadratic"), ConfigurationError);
}

TEST(ValidatedModel, MaterializesTargets) {
  ModelSpec spec = ModelSpec::HeatEquation(8);
  EXPECT_FALSE(ValidatedModel::create(spec)->G_tilde().has_value());
  spec.drift_G = relaxation();
  const auto model = ValidatedModel::create(spec);
  ASSERT_TRUE(model->G_tilde().has_value());
  ASSERT_TRUE(model->F_tilde().has_value());
  EXPECT_EQ(model->grid().nodes(), 32);
  EXPECT_DOUBLE_EQ(model->spectral_gap(), 0.5);
}
