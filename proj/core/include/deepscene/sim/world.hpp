#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepscene/encoders/scene.hpp"
#include "deepscene/random.hpp"
#include "deepscene/sim/driver.hpp"

namespace deepscene::sim {

enum class Action : std::uint8_t { keep = 0, left = 1, right = 2 };
inline constexpr std::size_t kActionCount = 3;

std::string to_string(Action a);
Action action_from_index(std::size_t index);

enum class ScenarioKind : std::uint8_t { highway, fast_lanes };

std::string to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

/// A lane that exists only on [start_m, end_m) of the ring.
struct LaneSegment {
  int lane_index = 0;
  double start_m = 0.0;
  double end_m = 0.0;
  bool is_fast_lane = false;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::highway;
  double ring_length_m = 1000.0;
  int base_lanes = 3;
  std::vector<LaneSegment> fast_sections;  // all on lane index base_lanes

  double tick_s = 0.5;
  int ticks_per_decision = 4;
  double headway_s = 0.5;
  double min_gap_m = 2.0;

  double truck_probability = 0.10;
  double motorcycle_probability = 0.05;

  double desired_speed_mps = 10.0;
  double lane_change_penalty = 0.05;
  double d_max_m = 80.0;
  double sign_distance_m = 200.0;

  // Lateral behaviour of the other vehicles.
  double strategic_lookahead_m = 150.0;  // do not enter a lane ending within this distance
  double merge_zone_m = 100.0;           // leave an ending lane once this close to its end
  double agent_merge_zone_m = 10.0;      // agent is moved out of an ending lane once this close
  double anticipation_s = 5.0;

  /// Append own/left/right lane descriptors to the static features (fixed
  /// representation; missing lanes as zeros with valid = 0).
  bool static_lane_slots = false;

  static ScenarioConfig highway();
  static ScenarioConfig fast_lanes();
  /// 300 m ring variants used for desk-scale experiments.
  static ScenarioConfig desk_highway();
  static ScenarioConfig desk_fast_lanes();
  static ScenarioConfig preset(const std::string& name);

  [[nodiscard]] int lane_count() const { return base_lanes + (fast_sections.empty() ? 0 : 1); }
  [[nodiscard]] int fast_lane_index() const { return base_lanes; }
  [[nodiscard]] std::size_t static_dim() const { return static_lane_slots ? 3 + 12 : 3; }
  void validate() const;
};

struct Vehicle {
  int id = 0;
  double position_m = 0.0;  // centre of the vehicle on the ring
  double speed_mps = 0.0;
  int lane_index = 0;
  double length_m = 4.5;
  DriverParams driver;
  bool is_agent = false;
};

struct StepResult {
  double reward = 0.0;
  Action executed = Action::keep;
  bool gate_override = false;  // the policy asked for an unsafe lane change
};

/// Running totals for the agent, updated every tick.
struct AgentStats {
  std::size_t ticks = 0;
  double speed_sum = 0.0;
  double distance_m = 0.0;
  std::size_t lane_changes = 0;
  std::size_t fast_lane_ticks = 0;
  std::size_t gate_overrides = 0;
};

class SimWorld {
 public:
  SimWorld(ScenarioConfig config, std::vector<Vehicle> vehicles, std::uint64_t seed);

  [[nodiscard]] const ScenarioConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  [[nodiscard]] const Vehicle& agent() const { return vehicles_.at(agent_); }
  [[nodiscard]] const AgentStats& stats() const { return stats_; }
  [[nodiscard]] double time_s() const { return time_s_; }

  StepResult step(Action action);

  [[nodiscard]] bool lane_exists(int lane, double position_m) const;
  /// Lane exists over the whole footprint of a vehicle of `length` centred at position.
  [[nodiscard]] bool lane_covers(int lane, double position_m, double length) const;
  /// Safety gate for moving vehicle `index` into `target_lane` right now.
  [[nodiscard]] bool lane_change_safe(std::size_t index, int target_lane) const;
  [[nodiscard]] bool action_safe(Action a) const;

  /// Gap from vehicle i's front bumper to its leader's rear bumper (infinity if none).
  [[nodiscard]] double leader_gap(std::size_t index) const;
  /// Smallest bumper-to-bumper gap among same-lane pairs.
  [[nodiscard]] double min_same_lane_gap() const;
  /// Throws SimulatorBug on any violated vehicle invariant.
  void check_invariants() const;

  /// Distance along the ring from a to b in driving direction, in [0, L).
  [[nodiscard]] double forward_distance(double from, double to) const;
  /// Shortest signed arc from a to b.
  [[nodiscard]] double signed_distance(double from, double to) const;

  /// Distance from position to the end of the lane, infinity for continuous lanes.
  [[nodiscard]] double distance_to_lane_end(int lane, double position_m) const;
  /// Anticipated speed for vehicle i if it were driving in `lane`.
  [[nodiscard]] double anticipated_speed(std::size_t index, int lane) const;

  // Test hooks.
  Vehicle& mutable_vehicle(std::size_t index) { return vehicles_.at(index); }
  std::size_t agent_index() const { return agent_; }

 private:
  struct Neighbours {
    std::optional<std::size_t> leader;
    std::optional<std::size_t> follower;
    double leader_gap = 0.0;
    double follower_gap = 0.0;
  };

  Neighbours neighbours_in_lane(std::size_t index, int lane) const;
  bool try_change(std::size_t index, int target_lane);
  void decide_other_lane_changes();
  void forced_merges();
  void tick();
  const LaneSegment* section_at(double position_m) const;

  ScenarioConfig config_;
  std::vector<Vehicle> vehicles_;
  std::size_t agent_ = 0;
  Rng rng_;
  std::vector<bool> yielding_;
  double time_s_ = 0.0;
  AgentStats stats_;
};

/// Places `n_vehicles` (agent included) uniformly on the base lanes without
/// gap violations. Throws PlacementError if the road is too full.
SimWorld spawn_scenario(const ScenarioConfig& config, int n_vehicles, std::uint64_t seed);

/// r = 1 - |v - v_desired| / v_desired - p_lc(action), clamped to [-1, 1].
double reward(double v_current, double v_desired, Action intended, double lane_change_penalty);
double reward(const SimWorld& world, Action intended);

SceneState extract_features(const SimWorld& world);

}  // namespace deepscene::sim
