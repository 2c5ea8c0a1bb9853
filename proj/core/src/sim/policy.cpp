#include "deepscene/sim/policy.hpp"

#include <vector>

#include "deepscene/errors.hpp"

namespace deepscene::sim {

std::string to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::collector: return "collector";
    case PolicyMode::baseline: return "rule";
    case PolicyMode::keep_lane: return "keep";
  }
  return "unknown";
}

PolicyMode parse_policy_mode(const std::string& s) {
  if (s == "collector") return PolicyMode::collector;
  if (s == "rule" || s == "baseline") return PolicyMode::baseline;
  if (s == "keep") return PolicyMode::keep_lane;
  throw ConfigError("unknown policy '" + s + "' (collector, rule, keep)");
}

Action baseline_action(const SimWorld& world, const BaselineConfig& config) {
  const auto& cfg = world.config();
  const auto& a = world.agent();
  const std::size_t i = world.agent_index();
  const double current = world.anticipated_speed(i, a.lane_index);
  Action best = Action::keep;
  double best_gain = 0.0;
  for (const Action action : {Action::left, Action::right}) {
    const int target = a.lane_index + (action == Action::left ? 1 : -1);
    if (!world.lane_covers(target, a.position_m, a.length_m)) continue;
    if (target >= cfg.base_lanes && world.distance_to_lane_end(target, a.position_m) < cfg.strategic_lookahead_m) {
      continue;
    }
    const double gain = world.anticipated_speed(i, target) - current;
    if (gain > config.min_gain_mps && gain / a.driver.max_speed_mps > config.relative_gain && gain > best_gain) {
      best = action;
      best_gain = gain;
    }
  }
  return world.action_safe(best) ? best : Action::keep;
}

Action rule_based_policy(const SimWorld& world, PolicyMode mode, Rng& rng, const BaselineConfig& baseline) {
  switch (mode) {
    case PolicyMode::keep_lane: return Action::keep;
    case PolicyMode::baseline: return baseline_action(world, baseline);
    case PolicyMode::collector: {
      std::vector<Action> options{Action::keep};
      for (const Action action : {Action::left, Action::right}) {
        if (world.action_safe(action)) options.push_back(action);
      }
      const auto k = uniform_int(rng, 0, static_cast<std::int64_t>(options.size()) - 1);
      return options[static_cast<std::size_t>(k)];
    }
  }
  return Action::keep;
}

}  // namespace deepscene::sim
