#pragma once

// Strong-error estimation for coupled (slow-fast, averaged) pairs, rate fits,
// the composite-bound check for asymptotic families, and sweeps of the
// structural estimates (moments, increments, auxiliary gap, contraction).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stablescale/averaging.hpp"
#include "stablescale/model.hpp"

namespace stablescale {

/// theta (p - 1) / (theta (p - 1) + 2).
double theoretical_exponent(double theta, double p);

struct StrongErrorSettings {
  double T = 1.0;
  Index macro_steps = 500;
  Index pairs = 64;
  Index blocks = 8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  AveragedDriftSettings drift;
};

struct ErrorEstimate {
  double eps = 0.0;
  double p = 0.0;
  double value = 0.0;         ///< max over the grid of the median of means of |X - Xbar|^p
  double stderr_proxy = 0.0;  ///< block spread at the maximizing time
  double trimmed = 0.0;       ///< 10% trimmed mean at the maximizing time
  bool robust_agreement = true;  ///< median of means and trimmed mean within a factor 2
  Index pairs = 0;
  Index blocks = 0;
  Index argmax = 0;
  std::vector<double> profile;  ///< per-time robust estimate
};

ErrorEstimate strong_error(const std::shared_ptr<const ValidatedModel>& model,
                           ReferenceKind reference, double eps, double p,
                           const StrongErrorSettings& settings = {});

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(y) against log(x).
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct RateReport {
  std::vector<double> eps;
  std::vector<double> errors;
  std::vector<double> stderrs;
  double slope = 0.0;
  double intercept = 0.0;
  double theory = 0.0;
  double slack = 0.1;
  bool strictly_decreasing = false;
  bool monotone_within_noise = false;  ///< nonincreasing up to 2 stderr proxies
  bool pass = false;
};

/// Needs at least four strictly decreasing eps values and positive errors.
/// PASS when errors strictly decrease and slope >= theory - slack.
RateReport rate_fit(const std::vector<double>& eps, const std::vector<double>& errors,
                    const std::vector<double>& stderrs, double theta, double p,
                    double slack = 0.1);

struct ProfileReport {
  std::vector<double> eps;
  std::vector<double> horizon;  ///< eps^{-theta/(theta+2)}
  std::vector<double> phi1;
  std::vector<double> phi2_tilde;
  std::vector<double> bound;
  std::vector<double> ratio;    ///< error / bound
  double fitted_constant = 0.0;
  double constant_even = 0.0;   ///< fitted on eps[0], eps[2], ...
  double constant_odd = 0.0;    ///< fitted on eps[1], eps[3], ...
  double stability_factor = 3.0;
  bool stable = false;
  bool pass = false;
};

/// bound(eps) = eps^{exponent} + (phi1(T_eps) + phi2~(T_eps))^p with
/// T_eps = eps^{-theta/(theta+2)}; C = max error / bound.
ProfileReport theorem3_profile_check(const ValidatedModel& model, const std::vector<double>& eps,
                                     const std::vector<double>& errors, double p,
                                     double stability_factor = 3.0);

struct ConvergenceSettings {
  int theorem = 1;
  std::vector<double> eps_grid{0.1, 0.05, 0.02, 0.01};
  double p = 1.2;
  double slope_slack = 0.1;
  double constant_factor = 3.0;
  StrongErrorSettings error;
};

ReferenceKind reference_for_theorem(int theorem);

struct ConvergenceReport {
  int theorem = 1;
  ReferenceKind reference = ReferenceKind::EvolutionAveraged;
  double p = 0.0;
  std::vector<ErrorEstimate> errors;
  RateReport rate;
  std::optional<ProfileReport> profile;
  bool pass = false;
};

ConvergenceReport run_convergence(const std::shared_ptr<const ValidatedModel>& model,
                                  const ConvergenceSettings& settings);

enum class LemmaTarget { Moment, Increment, Auxiliary, Contraction };

std::string to_string(LemmaTarget target);
LemmaTarget parse_lemma_target(const std::string& name);

struct SweepSettings {
  double T = 1.0;
  Index pairs = 64;
  Index blocks = 8;
  double p = 1.2;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  std::vector<double> moment_eps{1.0, 0.1, 0.01};
  Index moment_steps = 500;
  double moment_ratio = 1.5;

  std::vector<double> deltas{0.1, 0.05, 0.025, 0.0125};
  double sweep_eps = 0.05;
  Index sweep_steps = 800;
  double slope_slack = 0.15;

  Index contraction_paths = 200;
  double contraction_start = -0.5;
  double contraction_end = 2.0;
  double contraction_dt = 0.01;
  double contraction_slack = 0.05;
};

struct LemmaCheck {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string detail;
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;
  bool pass() const;
};

/// Max over eps of the grid-max robust E|Y_t|^p divided by the min; passes below moment_ratio.
LemmaCheck moment_sweep(const ValidatedModel& model, const SweepSettings& settings);
/// Slope of int_0^T (E|X_t - X_{t(delta)}|^p)^{1/p} dt against delta.
LemmaCheck increment_sweep(const ValidatedModel& model, const SweepSettings& settings);
/// Slope of int_0^T (E|Y_t - Yhat_t|^p)^{1/p} dt against delta.
LemmaCheck auxiliary_sweep(const ValidatedModel& model, const SweepSettings& settings);
/// Worst ratio |Y1_t - Y2_t| / (e^{-(beta_1 - L_G)(t - s)/2} |y1 - y2|) over paths and grid.
LemmaCheck contraction_check(const ValidatedModel& model, const SweepSettings& settings);

LemmaReport lemma_sweeps(const ValidatedModel& model, const std::set<LemmaTarget>& targets,
                         const SweepSettings& settings = {});

/// eps,p,error,stderr,slope,theory,verdict
void write_rate_csv(std::ostream& out, const ConvergenceReport& report);
/// log_eps,log_error
void write_plot_data(std::ostream& out, const ConvergenceReport& report);
/// JSON object with the fitted rate, theory, verdict and per-eps rows.
std::string summary_json(const ConvergenceReport& report);
/// name,measured,threshold,verdict
void write_lemma_csv(std::ostream& out, const LemmaReport& report);

}  // namespace stablescale
