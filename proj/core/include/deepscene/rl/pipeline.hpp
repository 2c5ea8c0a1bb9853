#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/nn/checkpoint.hpp"
#include "deepscene/rl/trainer.hpp"
#include "deepscene/sim/dataset.hpp"
#include "deepscene/sim/policy.hpp"

namespace deepscene::rl {

enum class Algo { deepset_q, graph_q, deepscene_q_set, deepscene_q_graph, vbin_q, multi_rho_q };

std::string to_string(Algo a);
/// Accepts underscores or dashes ("graph-q").
Algo parse_algo(const std::string& s);
encoders::EncoderKind algo_kind(Algo a);

/// Default network for an algorithm on a scenario: vehicle-only encoders for
/// deepset/graph/vbin, vehicles + lanes for the typed ones.
encoders::ArchitectureConfig default_architecture(Algo a, const sim::ScenarioConfig& scenario);

struct TrainJob {
  Algo algo = Algo::deepset_q;
  encoders::ArchitectureConfig arch = encoders::ArchitectureConfig::defaults(encoders::EncoderKind::deepset);
  encoders::GraphOptions graph;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;  // final checkpoint
  std::filesystem::path loss_log;    // empty: no log file
  bool snapshots = true;             // <stem>.step<N><ext> next to the checkpoint
  nlohmann::json provenance = nlohmann::json::object();
};

struct TrainOutcome {
  std::vector<std::pair<std::size_t, double>> loss_log;  // (step, mean loss over the window)
  std::vector<std::filesystem::path> snapshots;
};

/// Runs the configured number of optimization steps on a loaded dataset.
/// Progress is reported through `progress` (step, windowed loss) if given.
TrainOutcome train(const TrainJob& job, const sim::Dataset& dataset,
                   const std::function<void(std::size_t, double)>& progress = {});

/// Checkpoint layout: tensors "online_a/…", "online_b/…", "target_a/…",
/// "target_b/…" plus metadata {format, algo, architecture, graph, scenario, train, step, seed, config}.
nn::Checkpoint make_checkpoint(Trainer& trainer, const TrainJob& job, const nlohmann::json& scenario);

struct LoadedPolicy {
  Algo algo = Algo::deepset_q;
  encoders::GraphOptions graph;
  sim::ScenarioConfig scenario;
  nlohmann::json metadata;
  std::unique_ptr<encoders::QNetwork<float>> net;
};

/// Loads the Q_A network of a checkpoint for greedy evaluation.
LoadedPolicy load_policy(const std::filesystem::path& path);

nlohmann::json graph_options_to_json(const encoders::GraphOptions& g);
encoders::GraphOptions graph_options_from_json(const nlohmann::json& j);

/// Greedy action of Q_A on the current world (ties to the lowest index).
sim::Action greedy_policy_action(const encoders::QNetwork<float>& net, const encoders::GraphOptions& graph,
                                 const sim::SimWorld& world);

struct EvaluateConfig {
  sim::ScenarioConfig scenario = sim::ScenarioConfig::highway();
  std::vector<int> vehicle_counts{30, 35, 40, 45, 50, 55, 60};
  int episodes_per_count = 20;
  int episode_length = 200;
  std::uint64_t seed = 0;
};

struct EpisodeMetrics {
  int vehicles = 0;
  int episode = 0;
  double mean_speed = 0.0;
  double lane_changes_per_km = 0.0;
  double fast_lane_fraction = 0.0;
  double gate_overrides = 0.0;
  double mean_reward = 0.0;
};

struct DensityRow {
  int vehicles = 0;
  double mean_speed = 0.0;
  double std_speed = 0.0;
  double lane_changes_per_km = 0.0;
  double std_lane_changes_per_km = 0.0;
  double fast_lane_fraction = 0.0;
  double std_fast_lane_fraction = 0.0;
  double gate_overrides = 0.0;
  double std_gate_overrides = 0.0;
  double mean_reward = 0.0;
};

struct Report {
  std::string policy;
  std::vector<DensityRow> rows;
  std::vector<EpisodeMetrics> episodes;

  /// Mean speed over all episodes.
  [[nodiscard]] double overall_mean_speed() const;
  [[nodiscard]] double overall_fast_lane_fraction() const;
};

using PolicyFn = std::function<sim::Action(const sim::SimWorld&, Rng&)>;

/// Runs every (vehicle count, episode) world with the given policy. Worlds
/// depend only on the seed, so different policies see identical scenarios.
Report evaluate_policy(const EvaluateConfig& config, const std::string& name, const PolicyFn& policy);

Report evaluate_baseline(const EvaluateConfig& config, sim::PolicyMode mode);

/// Throws ConfigError if the checkpoint's network cannot read the scenario's scenes.
Report evaluate_checkpoint(const EvaluateConfig& config, const LoadedPolicy& policy);

nlohmann::json report_to_json(const Report& report, const EvaluateConfig& config,
                              const nlohmann::json& provenance = nlohmann::json::object());
void write_report(const std::filesystem::path& path, const nlohmann::json& report);

}  // namespace deepscene::rl
