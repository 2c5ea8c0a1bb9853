#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepscene/rl/pipeline.hpp"
#include "deepscene/sim/dataset.hpp"

namespace deepscene::tools {

// Run configuration. A JSON document whose defaults are given by
// default_run_config(); config files and flags overlay it key by key.
//
//   seed                        0        root of every random stream
//   scenario.preset             highway  highway | fast_lanes | desk_highway | desk_fast_lanes
//   scenario.overrides          {}       any ScenarioConfig key (lane_change_penalty, d_max_m, ...)
//   algo                        deepset_q
//   graph.strategy              all_close | close_agent
//   graph.d_max / d_floor       80 / 0.5 m
//   graph.use_edge_weights      true
//   network                     {}       ArchitectureConfig overrides on top of the algo defaults
//   train.*                     lr 1e-4, gamma 0.99, tau 1e-4, batch 64, steps 1.25e6,
//                               log_every 1000, snapshot_every 50000
//   collect.transitions         500000
//   collect.min/max_vehicles    null     30-60 highway, 30-90 fast lanes, 8-16 desk
//   collect.episode_length      200
//   evaluate.densities          null     "30:90:5" full scale, "8:16:2" desk
//   evaluate.episodes           20       per density
//   evaluate.episode_length     200
//
// Null means "derived from the scenario preset".

nlohmann::json default_run_config();

/// Overlays `overrides` on `base`. Keys that `base` does not know raise
/// ConfigError, except below the free-form "scenario.overrides" and "network"
/// objects whose contents are checked when resolved.
void merge_config(nlohmann::json& base, const nlohmann::json& overrides, const std::string& where = "");

/// Defaults merged with the JSON file at `path`.
nlohmann::json load_run_config(const std::filesystem::path& path);

sim::ScenarioConfig resolve_scenario(const nlohmann::json& config);
sim::CollectConfig resolve_collect(const nlohmann::json& config);
encoders::GraphOptions resolve_graph(const nlohmann::json& config);
/// Architecture for the configured algo reading scenes of `scenario`.
encoders::ArchitectureConfig resolve_architecture(const nlohmann::json& config,
                                                  const sim::ScenarioConfig& scenario);
rl::TrainConfig resolve_train(const nlohmann::json& config);
rl::EvaluateConfig resolve_evaluate(const nlohmann::json& config, const sim::ScenarioConfig& scenario);

/// "a:b:c" (inclusive range with step), "a,b,c" or a single count.
std::vector<int> parse_densities(const std::string& text);
/// "lo:hi".
std::pair<int, int> parse_vehicle_range(const std::string& text);

}  // namespace deepscene::tools
