#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdshape/link.hpp"

namespace mdshape {

// Split-step simulation controls.
struct SimConfig {
  long symbols_per_run = 1 << 13;
  int runs = 2;
  uint64_t seed = 1;
  enum class StepRule { adaptive_phase, uniform } step_rule = StepRule::adaptive_phase;
  double max_nl_phase_per_step_rad = 0.5e-3;
  int uniform_steps_per_span = 200;
  double oversampling_margin = 2.0;  // grid rate >= margin * occupied band
};

struct Scenario {
  std::string id;
  std::string description;
  LinkConfig link;
  WdmConfig wdm;
  SimConfig sim;
};

// Built-in scenario library: fig3, multispan, singlespan, reduced.
const std::vector<Scenario>& builtin_scenarios();
Scenario get_scenario(const std::string& id);

// JSON round trip (mirrors the config keys; used by the CLI and manifests).
Scenario scenario_from_json_file(const std::string& path);
std::string scenario_to_json(const Scenario& s);

// Canonical config hash (hex SHA-1 of the normalized JSON).
std::string config_hash(const Scenario& s);

}  // namespace mdshape
