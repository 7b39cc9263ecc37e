#include "stablescale/collocation.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace stablescale {

CollocationGrid::CollocationGrid(Index modes, Index nodes) {
  if (modes < 1) throw ConfigurationError("CollocationGrid: need at least one mode");
  if (nodes < modes) {
    throw ConfigurationError("CollocationGrid: " + std::to_string(nodes) +
                             " nodes cannot resolve " + std::to_string(modes) + " modes");
  }
  const double pi = std::numbers::pi;
  const double spacing = pi / static_cast<double>(nodes + 1);
  const double norm = std::sqrt(2.0 / pi);
  points_ = Eigen::VectorXd::LinSpaced(nodes, spacing, spacing * static_cast<double>(nodes));
  synthesis_.resize(nodes, modes);
  for (Index j = 0; j < nodes; ++j) {
    for (Index k = 0; k < modes; ++k) {
      synthesis_(j, k) = norm * std::sin(static_cast<double>(k + 1) * points_[j]);
    }
  }
  analysis_ = spacing * synthesis_.transpose();
  unit_projection_ = analysis_ * Eigen::VectorXd::Ones(nodes);
}

}  // namespace stablescale
