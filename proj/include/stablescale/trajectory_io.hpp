#pragma once

// CSV persistence of single trajectories with a replay header.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "stablescale/dynamics.hpp"

namespace stablescale {

struct TrajectoryHeader {
  std::string model_hash;
  std::string manifest;
  std::uint64_t seed = 0;
  std::uint32_t trajectory_id = 0;
  double eps = 1.0;
  double T = 0.0;
  Index steps = 0;
  Index modes = 0;
  int fast_substeps = 1;
};

/// "# key=value" header lines, then t,slow_step,x_1..x_N[,y_1..y_N] rows in %.17g.
/// slow_step is the slow-noise step consumed on (t_n, t_{n+1}], empty on the last row.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const TrajectoryHeader& header);

struct StoredTrajectory {
  TrajectoryHeader header;
  Trajectory trajectory;
};

StoredTrajectory read_trajectory_csv(std::istream& in);

}  // namespace stablescale
