#include "stablescale/trajectory_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "stablescale/errors.hpp"
#include "stablescale/format.hpp"

namespace stablescale {

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const TrajectoryHeader& header) {
  const bool has_y = !trajectory.y.empty();
  const Index n = trajectory.x.empty() ? 0 : trajectory.x.front().dimension();
  out << "# stablescale trajectory\n"
      << "# model_hash=" << header.model_hash << '\n'
      << "# manifest=" << header.manifest << '\n'
      << "# seed=" << header.seed << '\n'
      << "# trajectory_id=" << header.trajectory_id << '\n'
      << "# eps=" << format_double(header.eps) << '\n'
      << "# T=" << format_double(header.T) << '\n'
      << "# steps=" << header.steps << '\n'
      << "# modes=" << n << '\n'
      << "# fast_substeps=" << header.fast_substeps << '\n';
  out << "t,slow_step";
  for (Index k = 1; k <= n; ++k) out << ",x_" << k;
  if (has_y) {
    for (Index k = 1; k <= n; ++k) out << ",y_" << k;
  }
  out << '\n';
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    out << format_double(trajectory.times[i]) << ',';
    if (i < trajectory.slow_noise_steps.size()) out << trajectory.slow_noise_steps[i];
    for (Index k = 0; k < n; ++k) out << ',' << format_double(trajectory.x[i][k]);
    if (has_y) {
      for (Index k = 0; k < n; ++k) out << ',' << format_double(trajectory.y[i][k]);
    }
    out << '\n';
  }
}

StoredTrajectory read_trajectory_csv(std::istream& in) {
  StoredTrajectory s;
  TrajectoryHeader& h = s.header;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw IoError("trajectory csv line " + std::to_string(line_no) + ": " + what);
  };
  bool columns_seen = false;
  Index n = 0;
  bool has_y = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      try {
        if (key == "model_hash") h.model_hash = value;
        else if (key == "manifest") h.manifest = value;
        else if (key == "seed") h.seed = std::stoull(value);
        else if (key == "trajectory_id") h.trajectory_id = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "eps") h.eps = std::stod(value);
        else if (key == "T") h.T = std::stod(value);
        else if (key == "steps") h.steps = std::stoll(value);
        else if (key == "modes") h.modes = std::stoll(value);
        else if (key == "fast_substeps") h.fast_substeps = std::stoi(value);
      } catch (const std::exception&) {
        fail("bad header value for " + key);
      }
      continue;
    }
    if (!columns_seen) {
      columns_seen = true;
      n = h.modes;
      const auto commas = static_cast<Index>(std::count(line.begin(), line.end(), ','));
      if (commas == 1 + 2 * n) has_y = true;
      else if (commas != 1 + n) fail("column count does not match modes");
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    const std::size_t expected = static_cast<std::size_t>(2 + (has_y ? 2 : 1) * n);
    if (cells.size() != expected) fail("wrong number of fields");
    try {
      s.trajectory.times.push_back(std::stod(cells[0]));
      if (!cells[1].empty()) s.trajectory.slow_noise_steps.push_back(std::stoll(cells[1]));
      Eigen::VectorXd x(n), y(n);
      for (Index k = 0; k < n; ++k) x[k] = std::stod(cells[static_cast<std::size_t>(2 + k)]);
      s.trajectory.x.emplace_back(x);
      if (has_y) {
        for (Index k = 0; k < n; ++k) y[k] = std::stod(cells[static_cast<std::size_t>(2 + n + k)]);
        s.trajectory.y.emplace_back(y);
      }
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      fail("unparsable number");
    }
  }
  if (!columns_seen) throw IoError("trajectory csv: missing column header");
  s.trajectory.seed = h.seed;
  s.trajectory.trajectory_id = h.trajectory_id;
  s.trajectory.eps = h.eps;
  if (has_y) {
    for (std::int64_t step : s.trajectory.slow_noise_steps) {
      for (int j = 0; j < h.fast_substeps; ++j) {
        s.trajectory.fast_noise_steps.push_back(step * h.fast_substeps + j);
      }
    }
  }
  return s;
}

}  // namespace stablescale
