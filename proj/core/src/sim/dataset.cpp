#include "deepscene/sim/dataset.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "deepscene/errors.hpp"

namespace deepscene::sim {

namespace {

// Shortest decimal that reads back to the same float, stored as a double.
double compact(float f) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), f);
  double d = 0.0;
  std::from_chars(buf, res.ptr, d);
  return static_cast<float>(d) == f ? d : static_cast<double>(f);
}

nlohmann::json floats_to_json(const std::vector<float>& values) {
  auto arr = nlohmann::json::array();
  for (const float v : values) arr.push_back(compact(v));
  return arr;
}

std::vector<float> floats_from_json(const nlohmann::json& j) {
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(static_cast<float>(v.get<double>()));
  return out;
}

}  // namespace

std::vector<Transition> collect_transitions(const CollectConfig& config) {
  config.scenario.validate();
  if (config.transitions < 1) throw ConfigError("transitions must be >= 1");
  if (config.min_vehicles < 1 || config.max_vehicles < config.min_vehicles) {
    throw ConfigError("vehicle range must satisfy 1 <= min <= max");
  }
  if (config.episode_length < 1) throw ConfigError("episode_length must be >= 1");

  std::vector<Transition> out;
  out.reserve(config.transitions);
  auto count_rng = make_rng(config.seed, "vehicle_count");
  for (std::int64_t episode = 0; out.size() < config.transitions; ++episode) {
    const auto e = static_cast<std::uint64_t>(episode);
    const int n = static_cast<int>(uniform_int(count_rng, config.min_vehicles, config.max_vehicles));
    auto world = spawn_scenario(config.scenario, n, derive_seed(config.seed, "episode", e));
    auto policy_rng = make_rng(config.seed, "collector", e);
    auto state = extract_features(world);
    for (int k = 0; k < config.episode_length && out.size() < config.transitions; ++k) {
      const Action action = rule_based_policy(world, PolicyMode::collector, policy_rng);
      const auto result = world.step(action);
      auto next = extract_features(world);
      out.push_back({std::move(state), action, result.reward, next, episode, k});
      state = std::move(next);
    }
  }
  return out;
}

nlohmann::json scene_to_json(const SceneState& scene) {
  nlohmann::json j;
  j["ego"] = scene.ego_id;
  j["static"] = floats_to_json(scene.static_features);
  auto sets = nlohmann::json::array();
  for (const auto& s : scene.dynamic_sets) {
    sets.push_back({{"type", to_string(s.type)}, {"dim", s.feature_dim}, {"ids", s.ids}, {"x", floats_to_json(s.features)}});
  }
  j["sets"] = std::move(sets);
  return j;
}

SceneState scene_from_json(const nlohmann::json& j) {
  SceneState scene;
  scene.ego_id = j.at("ego").get<std::int64_t>();
  scene.static_features = floats_from_json(j.at("static"));
  for (const auto& s : j.at("sets")) {
    ObjectSet set;
    set.type = parse_object_type(s.at("type").get<std::string>());
    set.feature_dim = s.at("dim").get<std::size_t>();
    set.ids = s.at("ids").get<std::vector<std::int64_t>>();
    set.features = floats_from_json(s.at("x"));
    scene.dynamic_sets.push_back(std::move(set));
  }
  scene.validate();
  return scene;
}

nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  auto sections = nlohmann::json::array();
  for (const auto& s : c.fast_sections) sections.push_back({{"start_m", s.start_m}, {"end_m", s.end_m}});
  return {{"kind", to_string(c.kind)},
          {"ring_length_m", c.ring_length_m},
          {"base_lanes", c.base_lanes},
          {"fast_sections", sections},
          {"tick_s", c.tick_s},
          {"ticks_per_decision", c.ticks_per_decision},
          {"headway_s", c.headway_s},
          {"min_gap_m", c.min_gap_m},
          {"truck_probability", c.truck_probability},
          {"motorcycle_probability", c.motorcycle_probability},
          {"desired_speed_mps", c.desired_speed_mps},
          {"lane_change_penalty", c.lane_change_penalty},
          {"d_max_m", c.d_max_m},
          {"sign_distance_m", c.sign_distance_m},
          {"strategic_lookahead_m", c.strategic_lookahead_m},
          {"merge_zone_m", c.merge_zone_m},
          {"agent_merge_zone_m", c.agent_merge_zone_m},
          {"anticipation_s", c.anticipation_s},
          {"static_lane_slots", c.static_lane_slots}};
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig c) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  const auto known = scenario_to_json(c);
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw ConfigError("unknown scenario key '" + key + "'");
      if (key == "kind") c.kind = parse_scenario_kind(value.get<std::string>());
      else if (key == "ring_length_m") c.ring_length_m = value.get<double>();
      else if (key == "base_lanes") c.base_lanes = value.get<int>();
      else if (key == "fast_sections") {
        c.fast_sections.clear();
        for (const auto& s : value) {
          for (const auto& [k, v] : s.items()) {
            if (k != "start_m" && k != "end_m") throw ConfigError("unknown fast section key '" + k + "'");
          }
          c.fast_sections.push_back({c.base_lanes, s.at("start_m").get<double>(), s.at("end_m").get<double>(), true});
        }
      }
      else if (key == "tick_s") c.tick_s = value.get<double>();
      else if (key == "ticks_per_decision") c.ticks_per_decision = value.get<int>();
      else if (key == "headway_s") c.headway_s = value.get<double>();
      else if (key == "min_gap_m") c.min_gap_m = value.get<double>();
      else if (key == "truck_probability") c.truck_probability = value.get<double>();
      else if (key == "motorcycle_probability") c.motorcycle_probability = value.get<double>();
      else if (key == "desired_speed_mps") c.desired_speed_mps = value.get<double>();
      else if (key == "lane_change_penalty") c.lane_change_penalty = value.get<double>();
      else if (key == "d_max_m") c.d_max_m = value.get<double>();
      else if (key == "sign_distance_m") c.sign_distance_m = value.get<double>();
      else if (key == "strategic_lookahead_m") c.strategic_lookahead_m = value.get<double>();
      else if (key == "merge_zone_m") c.merge_zone_m = value.get<double>();
      else if (key == "agent_merge_zone_m") c.agent_merge_zone_m = value.get<double>();
      else if (key == "anticipation_s") c.anticipation_s = value.get<double>();
      else if (key == "static_lane_slots") c.static_lane_slots = value.get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scenario value: ") + e.what());
  }
  // Sections always sit on the lane left of the base lanes.
  for (auto& s : c.fast_sections) s.lane_index = c.base_lanes;
  c.validate();
  return c;
}

void write_dataset(const std::string& path, const nlohmann::json& header, const std::vector<Transition>& transitions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  nlohmann::json h = header;
  h["format"] = kDatasetFormat;
  h["version"] = kDatasetVersion;
  h["transitions"] = transitions.size();
  out << h.dump() << '\n';
  for (const auto& t : transitions) {
    const nlohmann::json record{{"episode", t.episode},
                                {"step", t.step},
                                {"action", static_cast<int>(t.action)},
                                {"reward", t.reward},
                                {"state", scene_to_json(t.state)},
                                {"next_state", scene_to_json(t.next_state)}};
    out << record.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  try {
    if (!std::getline(in, line)) throw IoError("dataset '" + path + "' is empty");
    ++line_no;
    ds.header = nlohmann::json::parse(line);
    if (ds.header.value("format", "") != kDatasetFormat) {
      throw IoError("'" + path + "' is not a transition dataset");
    }
    if (ds.header.value("version", 0) != kDatasetVersion) {
      throw IoError("unsupported dataset version in '" + path + "'");
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      Transition t;
      t.episode = j.at("episode").get<std::int64_t>();
      t.step = j.at("step").get<std::int64_t>();
      t.action = action_from_index(j.at("action").get<std::size_t>());
      t.reward = j.at("reward").get<double>();
      t.state = scene_from_json(j.at("state"));
      t.next_state = scene_from_json(j.at("next_state"));
      ds.transitions.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset '" + path + "' at line " + std::to_string(line_no) + ": " + e.what());
  } catch (const DimensionError& e) {
    throw IoError("malformed dataset '" + path + "' at line " + std::to_string(line_no) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("malformed dataset '" + path + "' at line " + std::to_string(line_no) + ": " + e.what());
  }
  if (ds.header.contains("transitions") && ds.header["transitions"].get<std::size_t>() != ds.transitions.size()) {
    throw IoError("dataset '" + path + "' is truncated");
  }
  return ds;
}

void collect_dataset(const CollectConfig& config, const std::string& path, const nlohmann::json& provenance) {
  const auto transitions = collect_transitions(config);
  nlohmann::json header;
  header["scenario"] = scenario_to_json(config.scenario);
  header["collect"] = {{"transitions", config.transitions},
                       {"min_vehicles", config.min_vehicles},
                       {"max_vehicles", config.max_vehicles},
                       {"episode_length", config.episode_length},
                       {"seed", config.seed}};
  header["config"] = provenance;
  write_dataset(path, header, transitions);
}

}  // namespace deepscene::sim
