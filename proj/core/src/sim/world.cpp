#include "deepscene/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "deepscene/errors.hpp"

namespace deepscene::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGapTolerance = 1e-6;

// Krauss safe speed behind a leader at bumper gap `gap` driving at v_leader.
double krauss_safe_speed(double gap, double min_gap, double v_leader, double v, double decel, double tau) {
  const double g = gap - min_gap;
  return v_leader + (g - v_leader * tau) / ((v + v_leader) / (2.0 * decel) + tau);
}

}  // namespace

std::string to_string(Action a) {
  switch (a) {
    case Action::keep: return "keep";
    case Action::left: return "left";
    case Action::right: return "right";
  }
  return "unknown";
}

Action action_from_index(std::size_t index) {
  if (index >= kActionCount) throw ConfigError("action index " + std::to_string(index) + " out of range");
  return static_cast<Action>(index);
}

std::string to_string(ScenarioKind k) { return k == ScenarioKind::highway ? "highway" : "fast_lanes"; }

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "highway") return ScenarioKind::highway;
  if (s == "fast_lanes") return ScenarioKind::fast_lanes;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

ScenarioConfig ScenarioConfig::highway() { return {}; }

ScenarioConfig ScenarioConfig::fast_lanes() {
  ScenarioConfig c;
  c.kind = ScenarioKind::fast_lanes;
  c.fast_sections = {{3, 100.0, 350.0, true}, {3, 600.0, 850.0, true}};
  return c;
}

ScenarioConfig ScenarioConfig::desk_highway() {
  ScenarioConfig c;
  c.ring_length_m = 300.0;
  return c;
}

ScenarioConfig ScenarioConfig::desk_fast_lanes() {
  ScenarioConfig c = desk_highway();
  c.kind = ScenarioKind::fast_lanes;
  c.fast_sections = {{3, 100.0, 200.0, true}};
  return c;
}

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  if (name == "highway") return highway();
  if (name == "fast_lanes") return fast_lanes();
  if (name == "desk_highway") return desk_highway();
  if (name == "desk_fast_lanes") return desk_fast_lanes();
  throw ConfigError("unknown scenario '" + name + "' (highway, fast_lanes, desk_highway, desk_fast_lanes)");
}

void ScenarioConfig::validate() const {
  if (!(ring_length_m > 0.0)) throw ConfigError("ring_length_m must be positive");
  if (base_lanes < 1) throw ConfigError("base_lanes must be >= 1");
  if (!(tick_s > 0.0) || ticks_per_decision < 1) throw ConfigError("tick_s and ticks_per_decision must be positive");
  if (headway_s < 0.0 || min_gap_m < 0.0) throw ConfigError("headway_s and min_gap_m must be non-negative");
  if (!(desired_speed_mps > 0.0)) throw ConfigError("desired_speed_mps must be positive");
  if (!(d_max_m > 0.0)) throw ConfigError("d_max_m must be positive");
  if (truck_probability < 0.0 || motorcycle_probability < 0.0 ||
      truck_probability + motorcycle_probability > 1.0) {
    throw ConfigError("class probabilities must be non-negative and sum to at most 1");
  }
  if (kind == ScenarioKind::highway && !fast_sections.empty()) {
    throw ConfigError("highway scenario has no fast-lane sections");
  }
  if (kind == ScenarioKind::fast_lanes && fast_sections.empty()) {
    throw ConfigError("fast_lanes scenario needs at least one section");
  }
  for (const auto& s : fast_sections) {
    if (s.lane_index != base_lanes) throw ConfigError("fast-lane sections must use lane index base_lanes");
    if (!(s.start_m >= 0.0 && s.start_m < s.end_m && s.end_m <= ring_length_m)) {
      throw ConfigError("fast-lane section must satisfy 0 <= start < end <= ring length");
    }
  }
  for (std::size_t i = 0; i < fast_sections.size(); ++i) {
    for (std::size_t j = i + 1; j < fast_sections.size(); ++j) {
      if (fast_sections[i].start_m < fast_sections[j].end_m && fast_sections[j].start_m < fast_sections[i].end_m) {
        throw ConfigError("fast-lane sections overlap");
      }
    }
  }
}

SimWorld::SimWorld(ScenarioConfig config, std::vector<Vehicle> vehicles, std::uint64_t seed)
    : config_(std::move(config)), vehicles_(std::move(vehicles)), rng_(make_rng(seed, "world")) {
  config_.validate();
  std::size_t agents = 0;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].is_agent) {
      agent_ = i;
      ++agents;
    }
  }
  if (agents != 1) throw ConfigError("a world needs exactly one agent, got " + std::to_string(agents));
  yielding_.assign(vehicles_.size(), false);
  check_invariants();
}

double SimWorld::forward_distance(double from, double to) const {
  double d = std::fmod(to - from, config_.ring_length_m);
  if (d < 0.0) d += config_.ring_length_m;
  return d;
}

double SimWorld::signed_distance(double from, double to) const {
  const double d = forward_distance(from, to);
  return d > config_.ring_length_m / 2.0 ? d - config_.ring_length_m : d;
}

const LaneSegment* SimWorld::section_at(double position_m) const {
  for (const auto& s : config_.fast_sections) {
    if (position_m >= s.start_m && position_m < s.end_m) return &s;
  }
  return nullptr;
}

bool SimWorld::lane_exists(int lane, double position_m) const {
  if (lane < 0) return false;
  if (lane < config_.base_lanes) return true;
  return lane == config_.fast_lane_index() && section_at(position_m) != nullptr;
}

bool SimWorld::lane_covers(int lane, double position_m, double length) const {
  if (lane < 0) return false;
  if (lane < config_.base_lanes) return true;
  if (lane != config_.fast_lane_index()) return false;
  const auto* s = section_at(position_m);
  return s != nullptr && position_m - length / 2.0 >= s->start_m - kGapTolerance &&
         position_m + length / 2.0 <= s->end_m + kGapTolerance;
}

double SimWorld::distance_to_lane_end(int lane, double position_m) const {
  if (lane < config_.base_lanes) return kInf;
  const auto* s = section_at(position_m);
  return s == nullptr ? 0.0 : s->end_m - position_m;
}

SimWorld::Neighbours SimWorld::neighbours_in_lane(std::size_t index, int lane) const {
  Neighbours nb;
  const auto& me = vehicles_[index];
  const bool ring = lane < config_.base_lanes;
  double best_ahead = kInf;
  double best_behind = kInf;
  for (std::size_t j = 0; j < vehicles_.size(); ++j) {
    if (j == index || vehicles_[j].lane_index != lane) continue;
    const auto& other = vehicles_[j];
    const double half = (me.length_m + other.length_m) / 2.0;
    if (ring) {
      const double ahead = forward_distance(me.position_m, other.position_m);
      const double behind = config_.ring_length_m - ahead;
      if (ahead < best_ahead) {
        best_ahead = ahead;
        nb.leader = j;
        nb.leader_gap = ahead - half;
      }
      if (behind < best_behind) {
        best_behind = behind;
        nb.follower = j;
        nb.follower_gap = behind - half;
      }
    } else {
      const double d = other.position_m - me.position_m;
      if (d >= 0.0 && d < best_ahead) {
        best_ahead = d;
        nb.leader = j;
        nb.leader_gap = d - half;
      } else if (d < 0.0 && -d < best_behind) {
        best_behind = -d;
        nb.follower = j;
        nb.follower_gap = -d - half;
      }
    }
  }
  return nb;
}

double SimWorld::leader_gap(std::size_t index) const {
  const auto nb = neighbours_in_lane(index, vehicles_.at(index).lane_index);
  return nb.leader ? nb.leader_gap : kInf;
}

bool SimWorld::lane_change_safe(std::size_t index, int target_lane) const {
  const auto& v = vehicles_.at(index);
  if (target_lane < 0 || target_lane >= config_.lane_count()) return false;
  if (std::abs(target_lane - v.lane_index) != 1) return false;
  if (!lane_covers(target_lane, v.position_m, v.length_m)) return false;
  const auto nb = neighbours_in_lane(index, target_lane);
  if (nb.leader && nb.leader_gap < config_.min_gap_m + config_.headway_s * v.speed_mps) return false;
  if (nb.follower &&
      nb.follower_gap < config_.min_gap_m + config_.headway_s * vehicles_[*nb.follower].speed_mps) {
    return false;
  }
  if (target_lane >= config_.base_lanes &&
      distance_to_lane_end(target_lane, v.position_m) - v.length_m / 2.0 < config_.min_gap_m) {
    return false;
  }
  return true;
}

bool SimWorld::action_safe(Action a) const {
  const auto& v = agent();
  switch (a) {
    case Action::keep: return true;
    case Action::left: return lane_change_safe(agent_, v.lane_index + 1);
    case Action::right: return lane_change_safe(agent_, v.lane_index - 1);
  }
  return false;
}

double SimWorld::anticipated_speed(std::size_t index, int lane) const {
  const auto& v = vehicles_.at(index);
  const double v_max = v.driver.max_speed_mps;
  double v_ant = v_max;
  const auto nb = neighbours_in_lane(index, lane);
  if (nb.leader) {
    const double free = std::max(0.0, nb.leader_gap - config_.min_gap_m) / config_.anticipation_s;
    v_ant = std::min(v_max, vehicles_[*nb.leader].speed_mps + free);
  }
  if (lane >= config_.base_lanes) {
    const double to_end = distance_to_lane_end(lane, v.position_m) - v.length_m / 2.0;
    v_ant = std::min(v_ant, std::max(0.0, to_end - config_.min_gap_m) / config_.anticipation_s);
  }
  return v_ant;
}

bool SimWorld::try_change(std::size_t index, int target_lane) {
  if (!lane_change_safe(index, target_lane)) return false;
  vehicles_[index].lane_index = target_lane;
  if (index == agent_) ++stats_.lane_changes;
  return true;
}

void SimWorld::decide_other_lane_changes() {
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (i == agent_) continue;
    const auto& v = vehicles_[i];
    if (v.lane_index >= config_.base_lanes || v.driver.speed_gain_factor <= 0.0) continue;
    const double current = anticipated_speed(i, v.lane_index);
    const double threshold = 1.0 / v.driver.speed_gain_factor;
    std::optional<int> best;
    double best_gain = 0.0;
    for (const int target : {v.lane_index + 1, v.lane_index - 1}) {
      if (!lane_covers(target, v.position_m, v.length_m)) continue;
      if (target >= config_.base_lanes &&
          distance_to_lane_end(target, v.position_m) < config_.strategic_lookahead_m) {
        continue;
      }
      const double gain = anticipated_speed(i, target) - current;
      if (gain > 0.5 && gain / v.driver.max_speed_mps > threshold && gain > best_gain) {
        best = target;
        best_gain = gain;
      }
    }
    if (best) try_change(i, *best);
  }
}

void SimWorld::forced_merges() {
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    if (v.lane_index < config_.base_lanes) continue;
    const double zone = i == agent_ ? config_.agent_merge_zone_m : config_.merge_zone_m;
    if (distance_to_lane_end(v.lane_index, v.position_m) <= zone) try_change(i, v.lane_index - 1);
  }
}

void SimWorld::tick() {
  const std::size_t n = vehicles_.size();
  const double dt = config_.tick_s;
  const double mg = config_.min_gap_m;

  std::vector<std::optional<std::size_t>> leader(n);
  std::vector<double> gap(n, kInf);
  std::vector<double> end_gap(n, kInf);

  // Per-lane ordering by position gives leaders in O(n log n).
  std::vector<std::vector<std::size_t>> lanes(static_cast<std::size_t>(config_.lane_count()));
  for (std::size_t i = 0; i < n; ++i) lanes.at(static_cast<std::size_t>(vehicles_[i].lane_index)).push_back(i);
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    auto& order = lanes[l];
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return vehicles_[a].position_m < vehicles_[b].position_m ||
             (vehicles_[a].position_m == vehicles_[b].position_m && a < b);
    });
    const bool ring = static_cast<int>(l) < config_.base_lanes;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      if (!ring) end_gap[i] = distance_to_lane_end(static_cast<int>(l), vehicles_[i].position_m) - vehicles_[i].length_m / 2.0;
      if (order.size() < 2 || (!ring && k + 1 == order.size())) continue;
      const std::size_t j = order[(k + 1) % order.size()];
      leader[i] = j;
      gap[i] = forward_distance(vehicles_[i].position_m, vehicles_[j].position_m) -
               (vehicles_[i].length_m + vehicles_[j].length_m) / 2.0;
    }
  }

  // Blocked mergers that cooperative drivers in the lane to the right yield to.
  std::vector<std::size_t> mergers;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = vehicles_[i];
    if (v.lane_index < config_.base_lanes) continue;
    const double zone = i == agent_ ? config_.agent_merge_zone_m : config_.merge_zone_m;
    if (distance_to_lane_end(v.lane_index, v.position_m) <= zone) mergers.push_back(i);
  }

  std::vector<double> move(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = vehicles_[i];
    const auto& d = v.driver;
    const double v_free = std::min(d.max_speed_mps, v.speed_mps + d.accel_mps2 * dt);
    double v_safe = kInf;
    if (leader[i]) {
      v_safe = krauss_safe_speed(gap[i], mg, vehicles_[*leader[i]].speed_mps, v.speed_mps, d.decel_mps2,
                                 config_.headway_s);
    }
    if (end_gap[i] < kInf) {
      // Stationary obstacle at the lane end; stop with the front bumper at the end.
      v_safe = std::min(v_safe, krauss_safe_speed(end_gap[i] + mg, mg, 0.0, v.speed_mps, d.decel_mps2,
                                                  config_.headway_s));
    }
    if (yielding_[i]) {
      for (const auto m : mergers) {
        if (vehicles_[m].lane_index != v.lane_index + 1) continue;
        const double ahead = forward_distance(v.position_m, vehicles_[m].position_m);
        const double g = ahead - (v.length_m + vehicles_[m].length_m) / 2.0;
        if (ahead > 0.0 && ahead < config_.d_max_m && g > mg) {
          v_safe = std::min(v_safe, krauss_safe_speed(g, mg, vehicles_[m].speed_mps, v.speed_mps, d.decel_mps2,
                                                      config_.headway_s));
        }
      }
    }
    move[i] = std::max(0.0, std::min(v_free, v_safe)) * dt;
  }

  // Hard no-overlap constraint: a move never closes the gap below the minimum.
  for (std::size_t pass = 0; pass <= n + 1; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double bound = kInf;
      if (leader[i]) bound = gap[i] - mg + move[*leader[i]];
      bound = std::max(0.0, std::min(bound, end_gap[i]));
      if (move[i] > bound) {
        move[i] = bound;
        changed = true;
      }
    }
    if (!changed) break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& v = vehicles_[i];
    v.position_m = std::fmod(v.position_m + move[i], config_.ring_length_m);
    if (v.position_m < 0.0) v.position_m += config_.ring_length_m;
    v.speed_mps = move[i] / dt;
  }
  time_s_ += dt;

  const auto& a = vehicles_[agent_];
  ++stats_.ticks;
  stats_.speed_sum += a.speed_mps;
  stats_.distance_m += move[agent_];
  if (a.lane_index >= config_.base_lanes) ++stats_.fast_lane_ticks;
}

StepResult SimWorld::step(Action action) {
  StepResult result;
  if (action != Action::keep) {
    const int target = agent().lane_index + (action == Action::left ? 1 : -1);
    if (try_change(agent_, target)) {
      result.executed = action;
    } else {
      result.gate_override = true;
      ++stats_.gate_overrides;
    }
  }
  decide_other_lane_changes();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    yielding_[i] = i != agent_ && bernoulli(rng_, vehicles_[i].driver.cooperation_factor);
  }
  for (int t = 0; t < config_.ticks_per_decision; ++t) {
    forced_merges();
    tick();
    check_invariants();
  }
  result.reward = reward(*this, action);
  return result;
}

double SimWorld::min_same_lane_gap() const {
  double best = kInf;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) best = std::min(best, leader_gap(i));
  return best;
}

void SimWorld::check_invariants() const {
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    if (!(v.position_m >= 0.0 && v.position_m < config_.ring_length_m)) {
      throw SimulatorBug("vehicle " + std::to_string(v.id) + " position " + std::to_string(v.position_m) +
                         " outside the ring");
    }
    if (!(v.speed_mps >= 0.0)) throw SimulatorBug("vehicle " + std::to_string(v.id) + " has negative speed");
    if (v.lane_index < 0 || v.lane_index >= config_.lane_count() ||
        !lane_covers(v.lane_index, v.position_m, v.length_m)) {
      throw SimulatorBug("vehicle " + std::to_string(v.id) + " on lane " + std::to_string(v.lane_index) +
                         " not valid at " + std::to_string(v.position_m));
    }
    const double g = leader_gap(i);
    if (g < config_.min_gap_m - kGapTolerance) {
      throw SimulatorBug("collision: vehicle " + std::to_string(v.id) + " gap " + std::to_string(g) + " m");
    }
  }
}

SimWorld spawn_scenario(const ScenarioConfig& config, int n_vehicles, std::uint64_t seed) {
  config.validate();
  if (n_vehicles < 1) throw ConfigError("n_vehicles must be >= 1");
  auto rng = make_rng(seed, "spawn");
  constexpr int kAttempts = 2000;
  std::vector<Vehicle> vehicles;
  vehicles.reserve(static_cast<std::size_t>(n_vehicles));
  const auto arc = [&](double a, double b) {
    double d = std::fmod(b - a, config.ring_length_m);
    if (d < 0.0) d += config.ring_length_m;
    return std::min(d, config.ring_length_m - d);
  };
  for (int k = 0; k < n_vehicles; ++k) {
    Vehicle v;
    v.id = k;
    v.is_agent = k == 0;
    v.driver = k == 0 ? agent_driver()
                      : sample_driver(sample_vehicle_class(rng, config.truck_probability,
                                                           config.motorcycle_probability),
                                      rng);
    v.length_m = v.driver.length_m;
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      v.lane_index = static_cast<int>(uniform_int(rng, 0, config.base_lanes - 1));
      v.position_m = uniform(rng, 0.0, config.ring_length_m);
      placed = std::all_of(vehicles.begin(), vehicles.end(), [&](const Vehicle& o) {
        return o.lane_index != v.lane_index ||
               arc(o.position_m, v.position_m) - (o.length_m + v.length_m) / 2.0 >= config.min_gap_m;
      });
    }
    if (!placed) {
      throw PlacementError("cannot place vehicle " + std::to_string(k + 1) + " of " +
                           std::to_string(n_vehicles) + " on a " + std::to_string(config.ring_length_m) +
                           " m ring without gap violations");
    }
    vehicles.push_back(v);
  }
  return SimWorld(config, std::move(vehicles), derive_seed(seed, "world"));
}

double reward(double v_current, double v_desired, Action intended, double lane_change_penalty) {
  if (!(v_desired > 0.0)) throw ConfigError("v_desired must be positive");
  const double p = intended == Action::keep ? 0.0 : lane_change_penalty;
  return std::clamp(1.0 - std::abs(v_current - v_desired) / v_desired - p, -1.0, 1.0);
}

double reward(const SimWorld& world, Action intended) {
  return reward(world.agent().speed_mps, world.config().desired_speed_mps, intended,
                world.config().lane_change_penalty);
}

SceneState extract_features(const SimWorld& world) {
  const auto& cfg = world.config();
  const auto& a = world.agent();
  const double v_allowed = speed_limit_mps();

  SceneState scene;
  scene.ego_id = a.id;

  std::vector<std::size_t> order(world.vehicles().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return world.vehicles()[x].id < world.vehicles()[y].id; });
  ObjectSet vehicles{ObjectType::vehicle, kVehicleFeatures, {}, {}};
  for (const auto i : order) {
    const auto& v = world.vehicles()[i];
    const double d = world.signed_distance(a.position_m, v.position_m);
    if (std::abs(d) > cfg.d_max_m) continue;
    const std::vector<float> row{static_cast<float>(d / cfg.d_max_m),
                                 static_cast<float>((v.speed_mps - a.speed_mps) / v_allowed),
                                 static_cast<float>(v.lane_index - a.lane_index),
                                 static_cast<float>(v.length_m / 10.0)};
    vehicles.push_back(v.id, row);
  }
  scene.dynamic_sets.push_back(std::move(vehicles));

  // Lane descriptors keyed by lane index: start km, end km, valid, relative index.
  const double sign_km = cfg.sign_distance_m / 1000.0;
  std::vector<std::pair<int, std::vector<float>>> lane_rows;
  for (int l = 0; l < cfg.base_lanes; ++l) {
    lane_rows.push_back({l, {0.0F, static_cast<float>(sign_km), 1.0F, static_cast<float>(l - a.lane_index)}});
  }
  for (const auto& s : cfg.fast_sections) {
    const bool inside = a.position_m >= s.start_m && a.position_m < s.end_m;
    const double to_start = world.forward_distance(a.position_m, s.start_m);
    if (!inside && to_start > cfg.sign_distance_m) continue;
    const double to_end = world.forward_distance(a.position_m, s.end_m);
    const double start_km = inside ? 0.0 : to_start / 1000.0;
    const double end_km = inside && to_end <= cfg.sign_distance_m ? to_end / 1000.0 : sign_km;
    lane_rows.push_back({s.lane_index,
                         {static_cast<float>(start_km), static_cast<float>(end_km), inside ? 1.0F : 0.0F,
                          static_cast<float>(s.lane_index - a.lane_index)}});
  }
  if (cfg.kind == ScenarioKind::fast_lanes) {
    ObjectSet lanes{ObjectType::lane, kLaneFeatures, {}, {}};
    for (std::size_t k = 0; k < lane_rows.size(); ++k) {
      lanes.push_back(static_cast<int>(k), lane_rows[k].second);
    }
    scene.dynamic_sets.push_back(std::move(lanes));
  }

  scene.static_features = {static_cast<float>(a.speed_mps / cfg.desired_speed_mps),
                           world.lane_exists(a.lane_index + 1, a.position_m) ? 1.0F : 0.0F,
                           world.lane_exists(a.lane_index - 1, a.position_m) ? 1.0F : 0.0F};
  if (cfg.static_lane_slots) {
    for (const int l : {a.lane_index, a.lane_index + 1, a.lane_index - 1}) {
      std::vector<float> row(kLaneFeatures, 0.0F);
      for (const auto& [index, values] : lane_rows) {
        if (index == l) row = values;
      }
      scene.static_features.insert(scene.static_features.end(), row.begin(), row.end());
    }
  }
  return scene;
}

}  // namespace deepscene::sim
