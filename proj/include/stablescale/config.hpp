#pragma once

// JSON run configuration with sections space, operators, noise, drifts,
// initial_data and experiment. Periods are "p/q" strings.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stablescale/averaging.hpp"
#include "stablescale/model.hpp"

namespace stablescale {

/// Ill-formed document (syntax or types). The message carries line and column
/// for syntax errors and the key path for type errors.
class ConfigParseError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  double T = 1.0;
  Index macro_steps = 500;
  Index pairs = 64;
  Index blocks = 8;
  double p = 1.2;
  std::vector<double> eps_grid{0.1, 0.05, 0.02, 0.01};
  double slope_slack = 0.1;
  double constant_factor = 3.0;
  Index trajectories = 8;
  double eps = 0.05;
  AveragedDriftSettings drift;
};

struct RunConfig {
  ModelSpec model;
  ExperimentConfig experiment;
};

RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON for a configuration; parse_config(to_json(c)) == c.
std::string config_to_json(const RunConfig& config);

/// FNV-1a 64 of the canonical form: equal content gives equal hashes
/// regardless of key order and whitespace.
std::uint64_t config_hash(std::string_view text);
std::string hash_hex(std::uint64_t hash);

}  // namespace stablescale
