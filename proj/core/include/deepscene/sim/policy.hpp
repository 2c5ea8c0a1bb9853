#pragma once

#include <string>

#include "deepscene/random.hpp"
#include "deepscene/sim/world.hpp"

namespace deepscene::sim {

/// collector: uniform over the currently safe actions (keep always included).
/// baseline: speed-gain heuristic over the anticipated lane speeds.
/// keep_lane: never changes lanes.
enum class PolicyMode { collector, baseline, keep_lane };

std::string to_string(PolicyMode m);
PolicyMode parse_policy_mode(const std::string& s);

struct BaselineConfig {
  double min_gain_mps = 0.5;
  double relative_gain = 0.1;  // gain / max speed needed before changing
};

Action rule_based_policy(const SimWorld& world, PolicyMode mode, Rng& rng, const BaselineConfig& baseline = {});

Action baseline_action(const SimWorld& world, const BaselineConfig& config = {});

}  // namespace deepscene::sim
