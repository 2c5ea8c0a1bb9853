#include "deepscene/rl/trainer.hpp"

#include <algorithm>
#include <limits>

#include "deepscene/errors.hpp"
#include "deepscene/nn/ops.hpp"

namespace deepscene::rl {

void check_schema(const std::vector<sim::Transition>& transitions, const encoders::ArchitectureConfig& config) {
  for (const auto type : config.object_types) {
    const bool present = std::any_of(transitions.begin(), transitions.end(), [&](const sim::Transition& t) {
      return t.state.find(type) != nullptr || t.next_state.find(type) != nullptr;
    });
    if (!present) {
      throw ConfigError("dataset has no '" + to_string(type) + "' objects, required by the " +
                        encoders::to_string(config.kind) + " encoder");
    }
  }
  if (!transitions.empty() && transitions.front().state.static_features.size() != config.static_dim) {
    throw ConfigError("dataset static features have dim " +
                      std::to_string(transitions.front().state.static_features.size()) + ", network expects " +
                      std::to_string(config.static_dim));
  }
}

ReplayBuffer::ReplayBuffer(const std::vector<sim::Transition>& transitions,
                           const encoders::ArchitectureConfig& config, const encoders::GraphOptions& options) {
  check_schema(transitions, config);
  states_.reserve(transitions.size());
  next_states_.reserve(transitions.size());
  for (const auto& t : transitions) {
    states_.push_back(encoders::prepare_scene(t.state, config, options));
    next_states_.push_back(encoders::prepare_scene(t.next_state, config, options));
    actions_.push_back(static_cast<std::size_t>(t.action));
    rewards_.push_back(static_cast<float>(t.reward));
  }
}

std::vector<double> min_max_targets(std::span<const double> q_a, std::span<const double> q_b,
                                    std::span<const double> rewards, std::size_t num_actions, double gamma) {
  if (q_a.size() != q_b.size() || q_a.size() != rewards.size() * num_actions) {
    throw DimensionError("target rows do not match the reward count");
  }
  std::vector<double> y(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < num_actions; ++a) {
      best = std::max(best, std::min(q_a[i * num_actions + a], q_b[i * num_actions + a]));
    }
    y[i] = gamma == 0.0 ? rewards[i] : rewards[i] + gamma * best;
  }
  return y;
}

template <typename T>
std::vector<T> compute_targets(const encoders::SceneBatch<T>& next_states, std::span<const T> rewards,
                               const encoders::QNetwork<T>& target_a, const encoders::QNetwork<T>& target_b,
                               double gamma) {
  if (rewards.size() != next_states.batch_size) {
    throw DimensionError("got " + std::to_string(rewards.size()) + " rewards for a batch of " +
                         std::to_string(next_states.batch_size));
  }
  if (rewards.empty()) throw UsageError("compute_targets needs a nonempty batch");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  nn::NoGradGuard no_grad;
  const auto qa = target_a.forward(next_states);
  const auto qb = target_b.forward(next_states);
  const std::vector<double> a(qa.values().begin(), qa.values().end());
  const std::vector<double> b(qb.values().begin(), qb.values().end());
  const std::vector<double> r(rewards.begin(), rewards.end());
  const auto y = min_max_targets(a, b, r, qa.cols(), gamma);
  std::vector<T> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    // γ = 0 returns the reward bit-for-bit.
    out[i] = gamma == 0.0 ? rewards[i] : static_cast<T>(y[i]);
  }
  return out;
}

template std::vector<float> compute_targets<float>(const encoders::SceneBatch<float>&, std::span<const float>,
                                                   const encoders::QNetwork<float>&,
                                                   const encoders::QNetwork<float>&, double);
template std::vector<double> compute_targets<double>(const encoders::SceneBatch<double>&, std::span<const double>,
                                                     const encoders::QNetwork<double>&,
                                                     const encoders::QNetwork<double>&, double);

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"gamma", c.gamma},       {"tau", c.tau},
       {"batch_size", c.batch_size},       {"steps", c.steps},       {"log_every", c.log_every},
       {"snapshot_every", c.snapshot_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "steps") c.steps = value.get<std::size_t>();
      else if (key == "log_every") c.log_every = value.get<std::size_t>();
      else if (key == "snapshot_every") c.snapshot_every = value.get<std::size_t>();
      else throw ConfigError("unknown training key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training value: ") + e.what());
  }
}

Trainer::Trainer(const encoders::ArchitectureConfig& arch, const TrainConfig& config, std::uint64_t seed)
    : config_(config),
      online_a_(arch, derive_seed(seed, "init", 0)),
      online_b_(arch, derive_seed(seed, "init", 1)),
      target_a_(online_a_.clone()),
      target_b_(online_b_.clone()),
      sample_rng_(make_rng(seed, "sampling")) {
  config_.validate();
  adam_a_.config.learning_rate = config_.learning_rate;
  adam_b_.config.learning_rate = config_.learning_rate;
}

double Trainer::train_step(const ReplayBuffer& buffer) {
  if (buffer.size() < config_.batch_size) {
    throw ConfigError("replay buffer holds " + std::to_string(buffer.size()) + " transitions, fewer than batch size " +
                      std::to_string(config_.batch_size));
  }
  std::vector<std::size_t> rows(config_.batch_size);
  for (auto& r : rows) r = static_cast<std::size_t>(uniform_int(sample_rng_, 0, static_cast<std::int64_t>(buffer.size()) - 1));
  return update(buffer, rows);
}

double Trainer::fit(encoders::QNetwork<float>& net, nn::AdamState<float>& adam,
                    const encoders::SceneBatch<float>& batch, std::span<const std::size_t> actions,
                    std::span<const float> targets) {
  auto params = net.parameters();
  const auto q = net.forward(batch);
  const auto loss = nn::mse(nn::pick(q, actions), targets);
  const auto grads = nn::gradients(loss, std::span<nn::Tensor<float>>(params));
  nn::adam_step(adam, std::span<nn::Tensor<float>>(params), grads);
  return static_cast<double>(loss.item());
}

double Trainer::update(const ReplayBuffer& buffer, std::span<const std::size_t> rows) {
  std::vector<const encoders::PreparedScene*> states;
  std::vector<const encoders::PreparedScene*> next_states;
  std::vector<std::size_t> actions;
  std::vector<float> rewards;
  for (const auto r : rows) {
    states.push_back(&buffer.state(r));
    next_states.push_back(&buffer.next_state(r));
    actions.push_back(buffer.action(r));
    rewards.push_back(buffer.reward(r));
  }
  const auto& arch = online_a_.config();
  const auto next_batch = encoders::make_batch<float>(std::span<const encoders::PreparedScene* const>(next_states), arch);
  const auto targets = compute_targets<float>(next_batch, rewards, target_a_, target_b_, config_.gamma);
  const auto batch = encoders::make_batch<float>(std::span<const encoders::PreparedScene* const>(states), arch);

  const double loss = fit(online_a_, adam_a_, batch, actions, targets);
  fit(online_b_, adam_b_, batch, actions, targets);

  auto ta = target_a_.parameters();
  auto tb = target_b_.parameters();
  const auto oa = online_a_.parameters();
  const auto ob = online_b_.parameters();
  nn::soft_update(std::span<nn::Tensor<float>>(ta), std::span<const nn::Tensor<float>>(oa), config_.tau);
  nn::soft_update(std::span<nn::Tensor<float>>(tb), std::span<const nn::Tensor<float>>(ob), config_.tau);
  ++step_;
  return loss;
}

}  // namespace deepscene::rl
