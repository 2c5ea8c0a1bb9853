#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepscene/encoders/scene.hpp"
#include "deepscene/sim/policy.hpp"
#include "deepscene/sim/world.hpp"

namespace deepscene::sim {

/// One replay tuple (s, a, s', r) with its origin.
struct Transition {
  SceneState state;
  Action action = Action::keep;
  double reward = 0.0;
  SceneState next_state;
  std::int64_t episode = 0;
  std::int64_t step = 0;

  bool operator==(const Transition&) const = default;
};

struct CollectConfig {
  ScenarioConfig scenario = ScenarioConfig::highway();
  std::size_t transitions = 1000;
  int min_vehicles = 30;
  int max_vehicles = 60;
  int episode_length = 200;
  std::uint64_t seed = 0;
};

/// Runs collector-policy episodes until `transitions` tuples are gathered.
std::vector<Transition> collect_transitions(const CollectConfig& config);

// Dataset file: JSON Lines. The first line is a header
//   {"format":"deepscene-transitions","version":1,"scenario":{...},"config":{...}}
// followed by one record per transition
//   {"episode":e,"step":k,"action":a,"reward":r,"state":S,"next_state":S}
// with scenes encoded as
//   {"ego":id,"static":[...],"sets":[{"type":"vehicle","dim":4,"ids":[...],"x":[...]}]}
// Feature values are written so that reading them back as float is exact.

inline constexpr const char* kDatasetFormat = "deepscene-transitions";
inline constexpr int kDatasetVersion = 1;

struct Dataset {
  nlohmann::json header;
  std::vector<Transition> transitions;
};

nlohmann::json scene_to_json(const SceneState& scene);
SceneState scene_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const ScenarioConfig& config);
/// Keys missing from `j` keep the values of `base`; unknown keys throw ConfigError.
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base);

/// Throws IoError if the file cannot be written.
void write_dataset(const std::string& path, const nlohmann::json& header, const std::vector<Transition>& transitions);
/// Throws IoError on unreadable or malformed files.
Dataset read_dataset(const std::string& path);

/// Collects and writes in one go; `provenance` is stored under "config" in the header.
void collect_dataset(const CollectConfig& config, const std::string& path, const nlohmann::json& provenance = {});

}  // namespace deepscene::sim
