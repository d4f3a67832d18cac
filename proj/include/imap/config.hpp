#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>
#include "imap/chain.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"

namespace imap {

struct OutputConfig {
  std::string directory = "out";
  /// Paths written to disk; statistics always use the full in-memory set.
  int max_persisted_paths = 1000;
};

/// Full experiment description. See docs/config.md for the file schema.
struct ScenarioConfig {
  ChainSpec chain;
  RegimeLevyParams levy;
  JumpLawSet impulse;
  double horizon = 1.0;
  double grid_step = 1.0 / 1024.0;
  int report_steps = 8;
  int max_power_order = 3;    // K
  int max_impulse_order = 3;  // L
  int estimation_paths = 100000;
  int evaluation_paths = 100000;
  std::uint64_t seed = 20240601;
  double pivot_tol = 1e-10;
  OutputConfig output;

  int n_states() const { return chain.n_states(); }
  TimeGrid grid() const { return make_grid(horizon, grid_step); }
  TimeGrid report_grid() const { return TimeGrid{horizon, report_steps}; }
  /// Simulation-grid steps per reporting step.
  int report_stride() const;

  /// Runs every component validation plus the moment condition.
  void validate() const;

  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig load(const std::string& path);

  /// Hex digest of the canonical JSON form (output directory excluded).
  std::string hash() const;

  /// Two symmetric states, lambda = 1; sigma = (1,1), mu = (0,0); unit-rate
  /// two-point +-1 Levy jumps with gamma = identity; U two-point +-1;
  /// T = 1, dt = 2^-10, 10^5 paths per set.
  static ScenarioConfig canonical();
};

nlohmann::json distribution_to_json(const JumpDistribution& d);
JumpDistribution distribution_from_json(const nlohmann::json& j);

}  // namespace imap
