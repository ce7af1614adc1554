#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lcmpc/world.hpp"

namespace lcmpc {

/// Raised for malformed or invalid scenario files (maps to the configuration
/// error exit code in the CLI).
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optional deterministic per-seed perturbation so independent trials differ.
struct ScenarioJitter {
  double speed_frac = 0.0;  ///< agents' initial vx scaled by U[-f, +f]
  double x_m = 0.0;         ///< agents' initial x shifted by U[-d, +d]
};

struct Scenario {
  int schema = 1;
  std::string name;
  double lane_width = 4.0;
  double dt = 0.1;
  int episode_steps = 300;
  std::uint64_t seed = 0;
  VehicleState ego_state;
  VehicleParams ego_params;
  std::vector<Agent> agents;
  std::optional<LaneId> case2_target_lane;
  ScenarioJitter jitter;
  std::string content_hash;  ///< FNV-1a of the file bytes, hex
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

/// Instantiate the closed-loop world; `seed` overrides the scenario seed and
/// drives the jitter draws.
WorldState make_world(const Scenario& sc, std::uint64_t seed);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace lcmpc
