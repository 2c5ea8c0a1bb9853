#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepscene/encoders/batch.hpp"
#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/nn/optim.hpp"
#include "deepscene/random.hpp"
#include "deepscene/sim/dataset.hpp"

namespace deepscene::rl {

/// Fixed replay buffer. Scenes are prepared once for the network layout
/// (adjacency, VBIN slots) and never modified afterwards.
class ReplayBuffer {
 public:
  ReplayBuffer(const std::vector<sim::Transition>& transitions, const encoders::ArchitectureConfig& config,
               const encoders::GraphOptions& options);

  [[nodiscard]] std::size_t size() const { return actions_.size(); }
  [[nodiscard]] const encoders::PreparedScene& state(std::size_t i) const { return states_.at(i); }
  [[nodiscard]] const encoders::PreparedScene& next_state(std::size_t i) const { return next_states_.at(i); }
  [[nodiscard]] std::size_t action(std::size_t i) const { return actions_.at(i); }
  [[nodiscard]] float reward(std::size_t i) const { return rewards_.at(i); }

 private:
  std::vector<encoders::PreparedScene> states_;
  std::vector<encoders::PreparedScene> next_states_;
  std::vector<std::size_t> actions_;
  std::vector<float> rewards_;
};

/// Throws ConfigError naming the first object type the architecture needs but
/// no transition provides, or a static-feature size mismatch.
void check_schema(const std::vector<sim::Transition>& transitions, const encoders::ArchitectureConfig& config);

/// y_i = r_i + γ · max_a min(Q'_A(s'_i, a), Q'_B(s'_i, a)), evaluated without a graph.
template <typename T>
std::vector<T> compute_targets(const encoders::SceneBatch<T>& next_states, std::span<const T> rewards,
                               const encoders::QNetwork<T>& target_a, const encoders::QNetwork<T>& target_b,
                               double gamma);

/// Same algebra on precomputed target Q rows (b × A each).
std::vector<double> min_max_targets(std::span<const double> q_a, std::span<const double> q_b,
                                    std::span<const double> rewards, std::size_t num_actions, double gamma);

struct TrainConfig {
  double learning_rate = 1e-4;
  double gamma = 0.99;
  double tau = 1e-4;
  std::size_t batch_size = 64;
  std::size_t steps = 1'250'000;
  std::size_t log_every = 1000;
  std::size_t snapshot_every = 50'000;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Two online Q-networks with their targets and optimizer states.
class Trainer {
 public:
  Trainer(const encoders::ArchitectureConfig& arch, const TrainConfig& config, std::uint64_t seed);

  /// Uniform minibatch (with replacement) from the buffer, then one update.
  double train_step(const ReplayBuffer& buffer);
  /// One update on the given buffer rows; returns the Q_A loss.
  double update(const ReplayBuffer& buffer, std::span<const std::size_t> rows);

  [[nodiscard]] std::size_t step() const { return step_; }
  [[nodiscard]] const TrainConfig& config() const { return config_; }

  encoders::QNetwork<float>& online_a() { return online_a_; }
  encoders::QNetwork<float>& online_b() { return online_b_; }
  encoders::QNetwork<float>& target_a() { return target_a_; }
  encoders::QNetwork<float>& target_b() { return target_b_; }
  [[nodiscard]] const encoders::QNetwork<float>& online_a() const { return online_a_; }

 private:
  double fit(encoders::QNetwork<float>& net, nn::AdamState<float>& adam, const encoders::SceneBatch<float>& batch,
             std::span<const std::size_t> actions, std::span<const float> targets);

  TrainConfig config_;
  encoders::QNetwork<float> online_a_;
  encoders::QNetwork<float> online_b_;
  encoders::QNetwork<float> target_a_;
  encoders::QNetwork<float> target_b_;
  nn::AdamState<float> adam_a_;
  nn::AdamState<float> adam_b_;
  Rng sample_rng_;
  std::size_t step_ = 0;
};

}  // namespace deepscene::rl
