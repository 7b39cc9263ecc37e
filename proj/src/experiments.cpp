#include "stablescale/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "stablescale/errors.hpp"
#include "stablescale/format.hpp"
#include "stablescale/statistics.hpp"

namespace stablescale {
namespace {

std::vector<std::uint32_t> pair_ids(Index count) {
  if (count < 1) throw ConfigurationError("need at least one trajectory");
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

// Per-column |a - b|^p for N x E matrices.
Eigen::VectorXd powered_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double p) {
  return (a - b).colwise().norm().array().pow(p).transpose();
}

double robust_moment(const Eigen::VectorXd& values, Index blocks) {
  return median_of_means(values, std::clamp<Index>(blocks, 1, values.size()));
}

double trapezoid(const std::vector<double>& values, double h) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
  return sum * h;
}

Index block_length(double delta, double dt, const char* who) {
  const double ratio = delta / dt;
  const auto block = static_cast<Index>(std::llround(ratio));
  if (block < 1 || std::abs(ratio - static_cast<double>(block)) > 1e-9 * ratio) {
    throw ConfigurationError(std::string(who) + ": delta = " + format_double(delta) +
                             " is not a multiple of the macro step " + format_double(dt));
  }
  return block;
}

}  // namespace

double theoretical_exponent(double theta, double p) {
  const double a = theta * (p - 1.0);
  return a / (a + 2.0);
}

ErrorEstimate strong_error(const std::shared_ptr<const ValidatedModel>& model,
                           ReferenceKind reference, double eps, double p,
                           const StrongErrorSettings& settings) {
  if (!model) throw ConfigurationError("strong_error: null model");
  const double alpha = model->alpha().value();
  if (!(p > 1.0 && p < alpha)) {
    throw DomainError("strong_error: p = " + format_double(p) + " must lie in (1, alpha = " +
                      format_double(alpha) + ")");
  }
  if (!(eps > 0.0)) throw DomainError("strong_error: eps must be positive");
  if (settings.blocks < 1 || settings.pairs < settings.blocks) {
    throw ConfigurationError("strong_error: need pairs >= blocks >= 1");
  }
  const std::vector<std::uint32_t> ids = pair_ids(settings.pairs);
  EnsembleOptions options;
  options.threads = settings.threads;

  const AveragedDrift drift(model, reference, settings.drift);
  const EnsemblePath slowfast = simulate_slowfast_ensemble(*model, eps, settings.T,
                                                           settings.macro_steps, settings.seed,
                                                           ids, options);
  const std::optional<double> scale = drift.scaled_time() ? std::optional<double>(eps) : std::nullopt;
  const EnsemblePath averaged =
      simulate_averaged_ensemble(*model, drift.as_ensemble_drift(), scale, settings.T,
                                 settings.macro_steps, settings.seed, ids, options);
  if (slowfast.slow_noise_steps != averaged.slow_noise_steps) {
    throw std::logic_error("strong_error: coupled runs consumed different slow-noise steps");
  }

  ErrorEstimate out;
  out.eps = eps;
  out.p = p;
  out.pairs = settings.pairs;
  out.blocks = settings.blocks;
  out.profile.reserve(slowfast.times.size());
  Eigen::VectorXd worst;
  for (std::size_t n = 0; n < slowfast.times.size(); ++n) {
    const Eigen::VectorXd d = powered_distance(slowfast.x[n], averaged.x[n], p);
    const double v = robust_moment(d, settings.blocks);
    out.profile.push_back(v);
    if (n == 0 || v > out.value) {
      out.value = v;
      out.argmax = static_cast<Index>(n);
      worst = d;
    }
  }
  const Index k = std::clamp<Index>(settings.blocks, 1, worst.size());
  out.stderr_proxy = block_spread(worst, k);
  out.trimmed = trimmed_mean(worst, 0.1);
  if (out.value > 0.0 || out.trimmed > 0.0) {
    const double ratio = out.value / out.trimmed;
    out.robust_agreement = ratio >= 0.5 && ratio <= 2.0;
  }
  return out;
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DomainError("fit_loglog: need at least two paired points");
  }
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_loglog: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_loglog: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

RateReport rate_fit(const std::vector<double>& eps, const std::vector<double>& errors,
                    const std::vector<double>& stderrs, double theta, double p, double slack) {
  if (eps.size() < 4) throw DomainError("rate_fit: need at least four eps values");
  if (errors.size() != eps.size() || (!stderrs.empty() && stderrs.size() != eps.size())) {
    throw DomainError("rate_fit: mismatched lengths");
  }
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw DomainError("rate_fit: eps must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw DomainError("rate_fit: eps grid must strictly decrease");
  }
  RateReport r;
  r.eps = eps;
  r.errors = errors;
  r.stderrs = stderrs.empty() ? std::vector<double>(eps.size(), 0.0) : stderrs;
  const LineFit fit = fit_loglog(eps, errors);
  r.slope = fit.slope;
  r.intercept = fit.intercept;
  r.theory = theoretical_exponent(theta, p);
  r.slack = slack;
  r.strictly_decreasing = true;
  r.monotone_within_noise = true;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    if (!(errors[i] < errors[i - 1])) r.strictly_decreasing = false;
    const double noise = 2.0 * std::max(r.stderrs[i], r.stderrs[i - 1]);
    if (errors[i] > errors[i - 1] + noise) r.monotone_within_noise = false;
  }
  r.pass = r.strictly_decreasing && r.slope >= r.theory - slack;
  return r;
}

ProfileReport theorem3_profile_check(const ValidatedModel& model, const std::vector<double>& eps,
                                     const std::vector<double>& errors, double p,
                                     double stability_factor) {
  if (!model.F_tilde() || !model.G_tilde()) {
    throw ConfigurationError("theorem3_profile_check: missing asymptotic profiles for F or G");
  }
  if (eps.size() != errors.size() || eps.size() < 2) {
    throw DomainError("theorem3_profile_check: need at least two paired eps and error values");
  }
  const double theta = model.theta();
  const double exponent = theoretical_exponent(theta, p);
  const DriftFamily& f = model.F();
  const DriftFamily& g = model.G();

  ProfileReport r;
  r.eps = eps;
  r.stability_factor = stability_factor;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw DomainError("theorem3_profile_check: eps must be positive");
    const double T = std::pow(eps[i], -theta / (theta + 2.0));
    const double p1 = f.averaging_profile(T);
    const double p2 = g.time_independent() ? 0.0 : phi2_tilde(model, T);
    const double bound = std::pow(eps[i], exponent) + std::pow(p1 + p2, p);
    r.horizon.push_back(T);
    r.phi1.push_back(p1);
    r.phi2_tilde.push_back(p2);
    r.bound.push_back(bound);
    r.ratio.push_back(errors[i] / bound);
  }
  r.fitted_constant = *std::max_element(r.ratio.begin(), r.ratio.end());
  for (std::size_t i = 0; i < r.ratio.size(); ++i) {
    double& c = i % 2 == 0 ? r.constant_even : r.constant_odd;
    c = std::max(c, r.ratio[i]);
  }
  const double hi = std::max(r.constant_even, r.constant_odd);
  const double lo = std::min(r.constant_even, r.constant_odd);
  r.stable = hi == 0.0 || (lo > 0.0 && hi / lo <= stability_factor);
  bool below = true;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] > r.fitted_constant * r.bound[i] * (1.0 + 1e-12)) below = false;
  }
  r.pass = r.stable && below;
  return r;
}

ReferenceKind reference_for_theorem(int theorem) {
  switch (theorem) {
    case 1:
      return ReferenceKind::EvolutionAveraged;
    case 2:
      return ReferenceKind::PeriodicAveraged;
    case 3:
      return ReferenceKind::AsymptoticAveraged;
    default:
      throw ConfigurationError("theorem must be 1, 2, or 3");
  }
}

ConvergenceReport run_convergence(const std::shared_ptr<const ValidatedModel>& model,
                                  const ConvergenceSettings& settings) {
  if (!model) throw ConfigurationError("run_convergence: null model");
  ConvergenceReport report;
  report.theorem = settings.theorem;
  report.reference = reference_for_theorem(settings.theorem);
  report.p = settings.p;
  std::vector<double> values, spreads;
  for (double eps : settings.eps_grid) {
    report.errors.push_back(strong_error(model, report.reference, eps, settings.p, settings.error));
    values.push_back(report.errors.back().value);
    spreads.push_back(report.errors.back().stderr_proxy);
  }
  report.rate = rate_fit(settings.eps_grid, values, spreads, model->theta(), settings.p,
                         settings.slope_slack);
  if (settings.theorem == 3) {
    report.profile = theorem3_profile_check(*model, settings.eps_grid, values, settings.p,
                                            settings.constant_factor);
    report.pass = report.profile->pass;
  } else {
    report.pass = report.rate.pass;
  }
  return report;
}

std::string to_string(LemmaTarget target) {
  switch (target) {
    case LemmaTarget::Moment:
      return "moment";
    case LemmaTarget::Increment:
      return "increment";
    case LemmaTarget::Auxiliary:
      return "auxiliary";
    case LemmaTarget::Contraction:
      return "contraction";
  }
  return "unknown";
}

LemmaTarget parse_lemma_target(const std::string& name) {
  if (name == "moment") return LemmaTarget::Moment;
  if (name == "increment") return LemmaTarget::Increment;
  if (name == "auxiliary") return LemmaTarget::Auxiliary;
  if (name == "contraction") return LemmaTarget::Contraction;
  throw ConfigurationError("unknown sweep '" + name +
                           "' (expected moment, increment, auxiliary, or contraction)");
}

bool LemmaReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const LemmaCheck& c) { return c.pass; });
}

LemmaCheck moment_sweep(const ValidatedModel& model, const SweepSettings& settings) {
  const std::vector<std::uint32_t> ids = pair_ids(settings.pairs);
  EnsembleOptions options;
  options.threads = settings.threads;
  LemmaCheck check;
  check.name = "moment";
  check.threshold = settings.moment_ratio;
  for (double eps : settings.moment_eps) {
    const EnsemblePath path = simulate_slowfast_ensemble(model, eps, settings.T,
                                                         settings.moment_steps, settings.seed, ids,
                                                         options);
    double worst = 0.0;
    for (const Eigen::MatrixXd& y : path.y) {
      const Eigen::VectorXd m = y.colwise().norm().array().pow(settings.p).transpose();
      worst = std::max(worst, robust_moment(m, settings.blocks));
    }
    check.xs.push_back(eps);
    check.ys.push_back(worst);
  }
  const auto [lo, hi] = std::minmax_element(check.ys.begin(), check.ys.end());
  check.measured = *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? INFINITY : 1.0);
  check.pass = check.measured < check.threshold;
  check.detail = "max/min over eps of sup_t E|Y_t|^p";
  return check;
}

namespace {

LemmaCheck delta_slope(const ValidatedModel& model, const SweepSettings& settings, bool auxiliary) {
  const std::vector<std::uint32_t> ids = pair_ids(settings.pairs);
  EnsembleOptions options;
  options.threads = settings.threads;
  const EnsemblePath path = simulate_slowfast_ensemble(model, settings.sweep_eps, settings.T,
                                                       settings.sweep_steps, settings.seed, ids,
                                                       options);
  const double dt = path.dt();
  LemmaCheck check;
  check.name = auxiliary ? "auxiliary" : "increment";
  check.threshold = model.theta() / 2.0 - settings.slope_slack;
  for (double delta : settings.deltas) {
    const Index block = block_length(delta, dt, check.name.c_str());
    std::vector<double> integrand;
    integrand.reserve(path.times.size());
    if (auxiliary) {
      const std::vector<Eigen::MatrixXd> hat = simulate_auxiliary(model, delta, path);
      for (std::size_t n = 0; n < path.times.size(); ++n) {
        const Eigen::VectorXd d = powered_distance(path.y[n], hat[n], settings.p);
        integrand.push_back(std::pow(robust_moment(d, settings.blocks), 1.0 / settings.p));
      }
    } else {
      for (std::size_t n = 0; n < path.times.size(); ++n) {
        const auto k = static_cast<std::size_t>((static_cast<Index>(n) / block) * block);
        const Eigen::VectorXd d = powered_distance(path.x[n], path.x[k], settings.p);
        integrand.push_back(std::pow(robust_moment(d, settings.blocks), 1.0 / settings.p));
      }
    }
    check.xs.push_back(delta);
    check.ys.push_back(trapezoid(integrand, dt));
  }
  check.measured = fit_loglog(check.xs, check.ys).slope;
  check.pass = check.measured >= check.threshold;
  check.detail = "log-log slope against delta";
  return check;
}

}  // namespace

LemmaCheck increment_sweep(const ValidatedModel& model, const SweepSettings& settings) {
  return delta_slope(model, settings, false);
}

LemmaCheck auxiliary_sweep(const ValidatedModel& model, const SweepSettings& settings) {
  return delta_slope(model, settings, true);
}

LemmaCheck contraction_check(const ValidatedModel& model, const SweepSettings& settings) {
  const Index n = model.dimension();
  const Index paths = settings.contraction_paths;
  const std::vector<std::uint32_t> ids = pair_ids(paths);
  const double gap = model.spectral_gap();
  if (!(gap > 0.0)) throw DomainError("contraction_check: spectral gap must be positive");

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd y2(n, paths);
  for (Index c = 0; c < paths; ++c) {
    for (Index k = 0; k < n; ++k) y2(k, c) = 2.0 * normal(rng) / static_cast<double>(k + 1);
  }
  const Eigen::MatrixXd y1 = Eigen::MatrixXd::Zero(n, 1);

  FrozenOptions opts;
  opts.dt = settings.contraction_dt;
  opts.record_path = true;
  const Field x = model.initial_x();
  const double s = settings.contraction_start;
  const FrozenEnsemble a = simulate_frozen_ensemble(model, s, settings.contraction_end, x, y1,
                                                    settings.seed, ids, opts);
  const FrozenEnsemble b = simulate_frozen_ensemble(model, s, settings.contraction_end, x, y2,
                                                    settings.seed, ids, opts);
  const Eigen::ArrayXd initial = y2.colwise().norm().transpose().array();

  LemmaCheck check;
  check.name = "contraction";
  check.threshold = 1.0 + settings.contraction_slack;
  Index passing = 0;
  Eigen::ArrayXd worst = Eigen::ArrayXd::Zero(paths);
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const double envelope = std::exp(-gap * (a.times[i] - s) / 2.0);
    const Eigen::ArrayXd diff = (a.path[i] - b.path[i]).colwise().norm().transpose().array();
    worst = worst.max(diff / (envelope * initial));
  }
  for (Index c = 0; c < paths; ++c) {
    if (worst[c] <= check.threshold) ++passing;
  }
  check.measured = worst.maxCoeff();
  check.xs.push_back(static_cast<double>(paths));
  check.ys.push_back(static_cast<double>(passing));
  check.pass = passing == paths;
  check.detail = std::to_string(passing) + "/" + std::to_string(paths) + " paths within the bound";
  return check;
}

LemmaReport lemma_sweeps(const ValidatedModel& model, const std::set<LemmaTarget>& targets,
                         const SweepSettings& settings) {
  LemmaReport report;
  for (LemmaTarget t : targets) {
    switch (t) {
      case LemmaTarget::Moment:
        report.checks.push_back(moment_sweep(model, settings));
        break;
      case LemmaTarget::Increment:
        report.checks.push_back(increment_sweep(model, settings));
        break;
      case LemmaTarget::Auxiliary:
        report.checks.push_back(auxiliary_sweep(model, settings));
        break;
      case LemmaTarget::Contraction:
        report.checks.push_back(contraction_check(model, settings));
        break;
    }
  }
  return report;
}

void write_rate_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "eps,p,error,stderr,slope,theory,verdict\n";
  const char* verdict = report.pass ? "PASS" : "FAIL";
  for (std::size_t i = 0; i < report.errors.size(); ++i) {
    const ErrorEstimate& e = report.errors[i];
    out << format_double(e.eps) << ',' << format_double(e.p) << ',' << format_double(e.value)
        << ',' << format_double(e.stderr_proxy) << ',' << format_double(report.rate.slope) << ','
        << format_double(report.rate.theory) << ',' << verdict << '\n';
  }
}

void write_plot_data(std::ostream& out, const ConvergenceReport& report) {
  out << "log_eps,log_error\n";
  for (const ErrorEstimate& e : report.errors) {
    out << format_double(std::log(e.eps)) << ',' << format_double(std::log(e.value)) << '\n';
  }
}

std::string summary_json(const ConvergenceReport& report) {
  nlohmann::ordered_json j;
  j["theorem"] = report.theorem;
  j["reference"] = to_string(report.reference);
  j["p"] = report.p;
  j["slope"] = report.rate.slope;
  j["intercept"] = report.rate.intercept;
  j["theoretical_exponent"] = report.rate.theory;
  j["slack"] = report.rate.slack;
  j["strictly_decreasing"] = report.rate.strictly_decreasing;
  j["monotone_within_noise"] = report.rate.monotone_within_noise;
  j["verdict"] = report.pass ? "PASS" : "FAIL";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const ErrorEstimate& e : report.errors) {
    nlohmann::ordered_json row;
    row["eps"] = e.eps;
    row["error"] = e.value;
    row["stderr_proxy"] = e.stderr_proxy;
    row["trimmed_mean"] = e.trimmed;
    row["robust_agreement"] = e.robust_agreement;
    row["pairs"] = e.pairs;
    row["blocks"] = e.blocks;
    rows.push_back(row);
  }
  j["errors"] = rows;
  if (report.profile) {
    const ProfileReport& p = *report.profile;
    nlohmann::ordered_json prof;
    prof["horizon"] = p.horizon;
    prof["phi1"] = p.phi1;
    prof["phi2_tilde"] = p.phi2_tilde;
    prof["bound"] = p.bound;
    prof["ratio"] = p.ratio;
    prof["fitted_constant"] = p.fitted_constant;
    prof["constant_even"] = p.constant_even;
    prof["constant_odd"] = p.constant_odd;
    prof["stability_factor"] = p.stability_factor;
    prof["stable"] = p.stable;
    j["profile"] = prof;
  }
  return j.dump(2);
}

void write_lemma_csv(std::ostream& out, const LemmaReport& report) {
  out << "name,measured,threshold,verdict\n";
  for (const LemmaCheck& c : report.checks) {
    out << c.name << ',' << format_double(c.measured) << ',' << format_double(c.threshold) << ','
        << (c.pass ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace stablescale
