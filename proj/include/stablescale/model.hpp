#pragma once

// Declarative problem description and its validation against the standing
// assumptions (spectral structure, noise summability, Lipschitz bounds with
// the spectral gap, periods, asymptotic targets).

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablescale/collocation.hpp"
#include "stablescale/drift_family.hpp"
#include "stablescale/rational.hpp"
#include "stablescale/spectral_space.hpp"
#include "stablescale/stable_noise.hpp"

namespace stablescale {

/// Analytic sequence value_k = scale * k^power, k = 1, 2, ...
struct PowerLaw {
  double scale = 1.0;
  double power = 0.0;

  Eigen::VectorXd sequence(Index n) const;
};

/// A sequence given either analytically or as an explicit list.
struct Sequence {
  std::optional<PowerLaw> law;
  Eigen::VectorXd values;

  static Sequence Analytic(Index n, PowerLaw law);
  static Sequence Explicit(Eigen::VectorXd values);
};

struct ModelSpec {
  Index dimension = 32;
  Index collocation_nodes = 0;  ///< 0 selects 4 * dimension
  Sequence eigen_A;
  Sequence eigen_B;
  double alpha = 1.5;
  double theta = 0.5;
  Sequence rho;
  Sequence gamma;
  DriftFamily drift_F;
  DriftFamily drift_G;
  Eigen::VectorXd initial_x;
  Eigen::VectorXd initial_y;
  int fast_substeps = 1;

  /// Heat equation on (0, pi) with Dirichlet conditions: lambda_k = beta_k =
  /// k^2, rho_k = gamma_k = 1, alpha = 1.5, theta = 0.5.
  static ModelSpec HeatEquation(Index dimension);
};

struct Violation {
  std::string code;
  std::string message;
};

/// Summability check of sum_k w_k^alpha / ev_k^q over the truncation.
struct TailReport {
  std::string name;
  bool symbolic = false;     ///< decided by the integral test on analytic families
  bool convergent = true;
  double decay_exponent = 0.0;  ///< summand ~ k^{decay_exponent} when symbolic
  double truncated_sum = 0.0;
  double tail_bound = 0.0;      ///< integral-test bound on the mass beyond N
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<TailReport> tails;
  std::vector<std::string> notes;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const;
};

ValidationReport validate(const ModelSpec& spec);

class ValidationFailure : public std::runtime_error {
 public:
  explicit ValidationFailure(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// A model that passed validation, with operators, noise, grid, and the
/// asymptotic targets materialized. Immutable.
class ValidatedModel {
 public:
  static std::shared_ptr<const ValidatedModel> create(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  Index dimension() const { return spec_.dimension; }
  const Operator& A() const { return A_; }
  const Operator& B() const { return B_; }
  const StableIndex& alpha() const { return alpha_; }
  double theta() const { return spec_.theta; }
  const NoiseWeights& rho() const { return rho_; }
  const NoiseWeights& gamma() const { return gamma_; }
  const CollocationGrid& grid() const { return grid_; }
  const DriftFamily& F() const { return spec_.drift_F; }
  const DriftFamily& G() const { return spec_.drift_G; }
  const std::optional<DriftFamily>& F_tilde() const { return F_tilde_; }
  const std::optional<DriftFamily>& G_tilde() const { return G_tilde_; }
  Field initial_x() const { return Field(spec_.initial_x); }
  Field initial_y() const { return Field(spec_.initial_y); }
  const ValidationReport& report() const { return report_; }

  /// beta_1 - L_G, the dissipativity margin of the frozen equation.
  double spectral_gap() const { return B_.first() - spec_.drift_G.lipschitz_y; }

 private:
  ValidatedModel(const ModelSpec& spec, ValidationReport report);

  ModelSpec spec_;
  Operator A_;
  Operator B_;
  StableIndex alpha_;
  NoiseWeights rho_;
  NoiseWeights gamma_;
  CollocationGrid grid_;
  std::optional<DriftFamily> F_tilde_;
  std::optional<DriftFamily> G_tilde_;
  ValidationReport report_;
};

using ModelPtr = std::shared_ptr<const ValidatedModel>;

/// Nemytskii evaluation: coefficients to nodes, f pointwise, back to N modes.
Field eval_drift(const DriftFamily& family, double t, const Field& x, const Field& y,
                 const CollocationGrid& grid);

/// Column-wise version for ensembles. `x` may have a single column, which is
/// then shared by every column of `y`.
Eigen::MatrixXd eval_drift(const DriftFamily& family, double t, const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& y, const CollocationGrid& grid);

/// Same as above with nodal values already computed.
Eigen::MatrixXd eval_drift_nodal(const DriftFamily& family, double t,
                                 const Eigen::MatrixXd& nodal_x,
                                 const Eigen::MatrixXd& nodal_y, const CollocationGrid& grid);

}  // namespace stablescale
