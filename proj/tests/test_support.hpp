#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stablescale/stable_noise.hpp"

namespace stablescale::testing {

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// n standard stable draws from consecutive steps of one stream.
inline std::vector<double> stable_draws(double alpha, std::uint64_t seed, NoiseRole role,
                                        std::size_t n, std::uint32_t trajectory = 0) {
  const StableIndex idx(alpha);
  NoiseStream stream(StreamKey{seed, role, trajectory});
  std::vector<double> out(n);
  for (auto& v : out) v = sample_standard_symmetric_stable(idx, stream);
  return out;
}

inline double mean_cos(const std::vector<double>& s, double h) {
  double acc = 0.0;
  for (double v : s) acc += std::cos(h * v);
  return acc / static_cast<double>(s.size());
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("stablescale_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace stablescale::testing
