#pragma once

#include <Eigen/Core>

#include "stablescale/spectral_space.hpp"

namespace stablescale {

/// Interior nodes xi_j = j pi / (M + 1), j = 1..M, of D = (0, pi) with the
/// discrete sine transform between coefficients on e_k(xi) = sqrt(2/pi)
/// sin(k xi) and nodal values. For M >= N the node quadrature with weight
/// pi/(M+1) is exact on products of the first M modes, so the round trip is
/// the identity and projection back onto N modes is nonexpansive.
class CollocationGrid {
 public:
  CollocationGrid() = default;
  CollocationGrid(Index modes, Index nodes);

  Index modes() const { return synthesis_.cols(); }
  Index nodes() const { return synthesis_.rows(); }
  const Eigen::VectorXd& points() const { return points_; }

  /// M x N matrix of basis values e_k(xi_j).
  const Eigen::MatrixXd& synthesis() const { return synthesis_; }
  /// N x M matrix mapping nodal values back to coefficients.
  const Eigen::MatrixXd& analysis() const { return analysis_; }

  /// Coefficients (N x E) to nodal values (M x E).
  template <typename Derived>
  Eigen::MatrixXd to_physical(const Eigen::MatrixBase<Derived>& coeffs) const {
    return synthesis_ * coeffs;
  }

  /// Nodal values (M x E) to coefficients (N x E).
  template <typename Derived>
  Eigen::MatrixXd to_spectral(const Eigen::MatrixBase<Derived>& values) const {
    return analysis_ * values;
  }

  /// Coefficients of the constant function 1 as seen through the grid.
  const Eigen::VectorXd& unit_projection() const { return unit_projection_; }

 private:
  Eigen::VectorXd points_;
  Eigen::MatrixXd synthesis_;
  Eigen::MatrixXd analysis_;
  Eigen::VectorXd unit_projection_;
};

}  // namespace stablescale
