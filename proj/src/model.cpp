#include "stablescale/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stablescale {

Eigen::VectorXd PowerLaw::sequence(Index n) const {
  Eigen::VectorXd v(n);
  for (Index k = 0; k < n; ++k) v[k] = scale * std::pow(double(k + 1), power);
  return v;
}

Sequence Sequence::Analytic(Index n, PowerLaw law) { return {law, law.sequence(n)}; }

Sequence Sequence::Explicit(Eigen::VectorXd values) { return {std::nullopt, std::move(values)}; }

ModelSpec ModelSpec::HeatEquation(Index dimension) {
  ModelSpec spec;
  spec.dimension = dimension;
  spec.eigen_A = Sequence::Analytic(dimension, {1.0, 2.0});
  spec.eigen_B = Sequence::Analytic(dimension, {1.0, 2.0});
  spec.rho = Sequence::Analytic(dimension, {1.0, 0.0});
  spec.gamma = Sequence::Analytic(dimension, {1.0, 0.0});
  spec.alpha = 1.5;
  spec.theta = 0.5;

  spec.drift_F.kind = DriftKind::SinusoidalTime;
  spec.drift_F.coeff_x = -0.5;
  spec.drift_F.coeff_y = 1.0;
  spec.drift_F.amplitude = 0.5;
  spec.drift_F.period = Rational(1);
  spec.drift_F.with_tight_constants();

  spec.drift_G.kind = DriftKind::SinusoidalTime;
  spec.drift_G.offset = 0.5;
  spec.drift_G.coeff_x = 0.3;
  spec.drift_G.coeff_y = 0.5;
  spec.drift_G.amplitude = 1.0;
  spec.drift_G.period = Rational(1, 2);
  spec.drift_G.with_tight_constants();

  spec.initial_x = Eigen::VectorXd::Zero(dimension);
  spec.initial_x[0] = 1.0;
  if (dimension > 1) spec.initial_x[1] = -0.5;
  spec.initial_y = Eigen::VectorXd::Zero(dimension);
  return spec;
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// sum_k w_k^alpha / ev_k^q, decided symbolically when both sequences are
// power laws (summand ~ k^{d alpha - b q}; integral test).
TailReport summability(const std::string& name, const Sequence& weights, const Sequence& ev,
                       double alpha, double q) {
  TailReport r;
  r.name = name;
  const Index n = std::min(weights.values.size(), ev.values.size());
  for (Index k = 0; k < n; ++k) {
    r.truncated_sum += std::pow(weights.values[k], alpha) / std::pow(ev.values[k], q);
  }
  if (weights.law && ev.law) {
    r.symbolic = true;
    const double coef = std::pow(weights.law->scale, alpha) / std::pow(ev.law->scale, q);
    r.decay_exponent = weights.law->power * alpha - ev.law->power * q;
    r.convergent = coef == 0.0 || r.decay_exponent < -1.0;
    if (r.convergent && coef != 0.0) {
      r.tail_bound = coef * std::pow(double(n), r.decay_exponent + 1.0) /
                     (-r.decay_exponent - 1.0);
    } else if (!r.convergent) {
      r.tail_bound = INFINITY;
    }
  }
  return r;
}

bool positive_nondecreasing(const Eigen::VectorXd& v, std::string& why) {
  if (v.size() == 0 || !v.allFinite()) {
    why = "empty or non-finite";
    return false;
  }
  if (!(v[0] > 0.0)) {
    why = "first eigenvalue " + fmt(v[0]) + " is not positive";
    return false;
  }
  for (Index k = 1; k < v.size(); ++k) {
    if (v[k] < v[k - 1]) {
      why = "eigenvalue " + std::to_string(k + 1) + " decreases";
      return false;
    }
  }
  return true;
}

void check_declared(const DriftFamily& f, const std::string& name, bool is_fast,
                    std::vector<Violation>& out) {
  if (f.lipschitz_x + 1e-15 < std::abs(f.coeff_x) ||
      f.lipschitz_y + 1e-15 < std::abs(f.coeff_y)) {
    out.push_back({"A3.lipschitz_declaration",
                   name + ": declared Lipschitz constants (" + fmt(f.lipschitz_x) + ", " +
                       fmt(f.lipschitz_y) + ") are below the coefficients (" +
                       fmt(std::abs(f.coeff_x)) + ", " + fmt(std::abs(f.coeff_y)) + ")"});
  }
  const double need = std::abs(f.offset) + std::abs(f.amplitude) + std::abs(f.coeff_x);
  const double need_y = is_fast ? 0.0 : std::abs(f.coeff_y);
  if (f.growth + 1e-15 < std::max(need, need_y)) {
    out.push_back({"A3.growth_declaration", name + ": declared growth constant " +
                                                fmt(f.growth) + " is below " +
                                                fmt(std::max(need, need_y))});
  }
  if (f.period && f.period->num() <= 0) {
    out.push_back({"A4.period", name + ": period must be positive"});
  }
  if ((f.kind == DriftKind::SinusoidalTime) && f.amplitude != 0.0 && !f.period) {
    out.push_back({"A4.period", name + ": sinusoidal drift needs a period"});
  }
  if (f.kind == DriftKind::ExponentialRelaxation && !(f.rate > 0.0)) {
    out.push_back({"A5.profile", name + ": relaxation rate must be positive"});
  }
}

}  // namespace

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport report;
  auto& v = report.violations;
  const Index n = spec.dimension;
  if (n < 1) {
    v.push_back({"dimension", "dimension must be at least 1"});
    return report;
  }
  auto check_len = [&](const Eigen::VectorXd& seq, const std::string& name, bool allow_short) {
    if (seq.size() == n || (allow_short && seq.size() <= n)) return true;
    v.push_back({"dimension", name + " has length " + std::to_string(seq.size()) +
                                  ", expected " + std::to_string(n)});
    return false;
  };
  const bool lengths_ok = check_len(spec.eigen_A.values, "eigenvalues of A", false) &
                          check_len(spec.eigen_B.values, "eigenvalues of B", false) &
                          check_len(spec.rho.values, "rho", false) &
                          check_len(spec.gamma.values, "gamma", false) &
                          check_len(spec.initial_x, "initial x", true) &
                          check_len(spec.initial_y, "initial y", true);

  std::string why;
  if (!positive_nondecreasing(spec.eigen_A.values, why)) {
    v.push_back({"A1.eigenvalues", "operator A: " + why});
  }
  if (!positive_nondecreasing(spec.eigen_B.values, why)) {
    v.push_back({"A1.eigenvalues", "operator B: " + why});
  }
  if (!(spec.alpha > 1.0 && spec.alpha < 2.0)) {
    v.push_back({"alpha_range", "alpha = " + fmt(spec.alpha) + " is outside (1, 2)"});
  }
  if (!(spec.theta > 0.0 && spec.theta < 2.0)) {
    v.push_back({"A2.theta_range", "theta = " + fmt(spec.theta) + " is outside (0, 2)"});
  }
  for (const auto* w : {&spec.rho, &spec.gamma}) {
    if (!w->values.allFinite() || (w->values.array() < 0.0).any()) {
      v.push_back({"noise_weights", "noise weights must be finite and nonnegative"});
    }
  }
  const Index nodes = spec.collocation_nodes == 0 ? 4 * n : spec.collocation_nodes;
  if (nodes < n) {
    v.push_back({"grid", "collocation grid of " + std::to_string(nodes) +
                             " nodes cannot resolve " + std::to_string(n) + " modes"});
  }
  if (spec.fast_substeps < 1) {
    v.push_back({"fast_substeps", "fast_substeps must be at least 1"});
  }

  if (lengths_ok && spec.alpha > 1.0 && spec.alpha < 2.0) {
    const double q_slow = 1.0 - spec.alpha * spec.theta / 2.0;
    report.tails.push_back(
        summability("slow: sum rho_k^alpha / lambda_k^(1 - alpha theta / 2)", spec.rho,
                    spec.eigen_A, spec.alpha, q_slow));
    report.tails.push_back(
        summability("fast: sum gamma_k^alpha / beta_k", spec.gamma, spec.eigen_B, spec.alpha, 1.0));
    for (const auto& t : report.tails) {
      if (!t.symbolic) {
        report.notes.push_back(t.name + ": explicit sequence, convergence not decidable; "
                               "truncated sum " + fmt(t.truncated_sum));
      } else if (!t.convergent) {
        v.push_back({t.name.starts_with("slow") ? "A2.slow_tail_divergent"
                                                : "A2.fast_tail_divergent",
                     "Assumption A2 tail divergent: " + t.name + " has summand ~ k^" +
                         fmt(t.decay_exponent)});
      }
    }
  }

  check_declared(spec.drift_F, "F", false, v);
  check_declared(spec.drift_G, "G", true, v);
  if (spec.eigen_B.values.size() > 0) {
    const double beta1 = spec.eigen_B.values[0];
    if (!(spec.drift_G.lipschitz_y < beta1)) {
      v.push_back({"A3.spectral_gap", "spectral gap violated: L_G = " +
                                          fmt(spec.drift_G.lipschitz_y) + " >= beta_1 = " +
                                          fmt(beta1)});
    }
  }

  const bool periodic = (spec.drift_F.periodic() || spec.drift_G.periodic()) &&
                        (spec.drift_F.time_independent() || spec.drift_F.periodic()) &&
                        (spec.drift_G.time_independent() || spec.drift_G.periodic());
  report.notes.push_back(std::string("A4 (periodic coefficients): ") +
                         (periodic ? "applicable" : "not applicable"));
  const bool asymptotic = spec.drift_F.averaged_target() && spec.drift_G.pointwise_target();
  report.notes.push_back(std::string("A5 (asymptotic targets): ") +
                         (asymptotic ? "applicable" : "not applicable"));
  return report;
}

namespace {
std::string summarize(const ValidationReport& report) {
  std::string s = "model validation failed:";
  for (const auto& v : report.violations) s += "\n  " + v.code + ": " + v.message;
  return s;
}

Eigen::VectorXd padded(const Eigen::VectorXd& v, Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(v.size()) = v;
  return out;
}
}  // namespace

ValidationFailure::ValidationFailure(ValidationReport report)
    : std::runtime_error(summarize(report)), report_(std::move(report)) {}

ValidatedModel::ValidatedModel(const ModelSpec& spec, ValidationReport report)
    : spec_(spec),
      A_(spec.eigen_A.values, OperatorLabel::A),
      B_(spec.eigen_B.values, OperatorLabel::B),
      alpha_(spec.alpha),
      rho_(spec.rho.values),
      gamma_(spec.gamma.values),
      grid_(spec.dimension, spec.collocation_nodes == 0 ? 4 * spec.dimension
                                                        : spec.collocation_nodes),
      F_tilde_(spec.drift_F.averaged_target()),
      G_tilde_(spec.drift_G.pointwise_target()),
      report_(std::move(report)) {
  spec_.initial_x = padded(spec.initial_x, spec.dimension);
  spec_.initial_y = padded(spec.initial_y, spec.dimension);
  if (spec_.collocation_nodes == 0) spec_.collocation_nodes = 4 * spec.dimension;
}

ModelPtr ValidatedModel::create(const ModelSpec& spec) {
  ValidationReport report = validate(spec);
  if (!report.ok()) throw ValidationFailure(std::move(report));
  return ModelPtr(new ValidatedModel(spec, std::move(report)));
}

Eigen::MatrixXd eval_drift_nodal(const DriftFamily& family, double t,
                                 const Eigen::MatrixXd& nodal_x, const Eigen::MatrixXd& nodal_y,
                                 const CollocationGrid& grid) {
  if (nodal_x.rows() != grid.nodes() || nodal_y.rows() != grid.nodes()) {
    throw ConfigurationError("eval_drift: nodal values do not match the grid");
  }
  if (nodal_x.cols() == nodal_y.cols()) {
    return grid.to_spectral(family.evaluate(t, nodal_x.array(), nodal_y.array()).matrix());
  }
  if (nodal_x.cols() == 1) {
    const Eigen::MatrixXd xs = nodal_x.replicate(1, nodal_y.cols());
    return grid.to_spectral(family.evaluate(t, xs.array(), nodal_y.array()).matrix());
  }
  throw ConfigurationError("eval_drift: ensemble sizes of x and y differ");
}

Eigen::MatrixXd eval_drift(const DriftFamily& family, double t, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y, const CollocationGrid& grid) {
  if (x.rows() != grid.modes() || y.rows() != grid.modes()) {
    throw ConfigurationError("eval_drift: field dimension " + std::to_string(x.rows()) + "/" +
                             std::to_string(y.rows()) + " does not match grid with " +
                             std::to_string(grid.modes()) + " modes");
  }
  return eval_drift_nodal(family, t, grid.to_physical(x), grid.to_physical(y), grid);
}

Field eval_drift(const DriftFamily& family, double t, const Field& x, const Field& y,
                 const CollocationGrid& grid) {
  require_same_dimension(x, y, "eval_drift");
  Eigen::MatrixXd out = eval_drift(family, t, Eigen::MatrixXd(x.coeffs()),
                                   Eigen::MatrixXd(y.coeffs()), grid);
  return Field(out.col(0));
}

}  // namespace stablescale
