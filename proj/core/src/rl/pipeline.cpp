#include "deepscene/rl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "deepscene/errors.hpp"
#include "deepscene/nn/checkpoint.hpp"

namespace deepscene::rl {

namespace {

constexpr const char* kCheckpointFormat = "deepscene-checkpoint";
constexpr const char* kReportFormat = "deepscene-report";

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::filesystem::path snapshot_path(const std::filesystem::path& checkpoint, std::size_t step) {
  auto name = checkpoint.stem().string() + ".step" + std::to_string(step) + checkpoint.extension().string();
  return checkpoint.parent_path() / name;
}

}  // namespace

std::string to_string(Algo a) {
  switch (a) {
    case Algo::deepset_q: return "deepset_q";
    case Algo::graph_q: return "graph_q";
    case Algo::deepscene_q_set: return "deepscene_q_set";
    case Algo::deepscene_q_graph: return "deepscene_q_graph";
    case Algo::vbin_q: return "vbin_q";
    case Algo::multi_rho_q: return "multi_rho_q";
  }
  return "unknown";
}

Algo parse_algo(const std::string& s) {
  std::string key = s;
  std::replace(key.begin(), key.end(), '-', '_');
  for (const Algo a : {Algo::deepset_q, Algo::graph_q, Algo::deepscene_q_set, Algo::deepscene_q_graph, Algo::vbin_q,
                       Algo::multi_rho_q}) {
    if (to_string(a) == key) return a;
  }
  throw ConfigError("unknown algo '" + s +
                    "' (deepset_q, graph_q, deepscene_q_set, deepscene_q_graph, vbin_q, multi_rho_q)");
}

encoders::EncoderKind algo_kind(Algo a) {
  switch (a) {
    case Algo::deepset_q: return encoders::EncoderKind::deepset;
    case Algo::graph_q: return encoders::EncoderKind::gcn;
    case Algo::deepscene_q_set: return encoders::EncoderKind::deepscene_set;
    case Algo::deepscene_q_graph: return encoders::EncoderKind::deepscene_graph;
    case Algo::vbin_q: return encoders::EncoderKind::vbin;
    case Algo::multi_rho_q: return encoders::EncoderKind::multi_rho;
  }
  return encoders::EncoderKind::deepset;
}

encoders::ArchitectureConfig default_architecture(Algo a, const sim::ScenarioConfig& scenario) {
  auto arch = encoders::ArchitectureConfig::defaults(algo_kind(a));
  arch.static_dim = scenario.static_dim();
  return arch;
}

nlohmann::json graph_options_to_json(const encoders::GraphOptions& g) {
  return {{"strategy", graph::to_string(g.strategy)},
          {"d_max", g.config.d_max},
          {"d_floor", g.config.d_floor},
          {"use_edge_weights", g.config.use_edge_weights}};
}

encoders::GraphOptions graph_options_from_json(const nlohmann::json& j) {
  encoders::GraphOptions g;
  if (!j.is_object()) throw ConfigError("graph options must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "strategy") g.strategy = graph::parse_strategy(value.get<std::string>());
      else if (key == "d_max") g.config.d_max = value.get<double>();
      else if (key == "d_floor") g.config.d_floor = value.get<double>();
      else if (key == "use_edge_weights") g.config.use_edge_weights = value.get<bool>();
      else throw ConfigError("unknown graph key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad graph value: ") + e.what());
  }
  return g;
}

nn::Checkpoint make_checkpoint(Trainer& trainer, const TrainJob& job, const nlohmann::json& scenario) {
  nn::Checkpoint ck;
  ck.metadata = {{"format", kCheckpointFormat},
                 {"algo", to_string(job.algo)},
                 {"architecture", job.arch},
                 {"graph", graph_options_to_json(job.graph)},
                 {"scenario", scenario},
                 {"train", job.train},
                 {"step", trainer.step()},
                 {"seed", job.seed},
                 {"config", job.provenance}};
  const auto add = [&](const std::string& prefix, encoders::QNetwork<float>& net) {
    const auto params = net.named_parameters();
    nn::add_parameters(ck, prefix, params);
  };
  add("online_a", trainer.online_a());
  add("online_b", trainer.online_b());
  add("target_a", trainer.target_a());
  add("target_b", trainer.target_b());
  return ck;
}

TrainOutcome train(const TrainJob& job, const sim::Dataset& dataset,
                   const std::function<void(std::size_t, double)>& progress) {
  job.train.validate();
  job.arch.validate();
  if (job.arch.kind != algo_kind(job.algo)) {
    throw ConfigError("architecture kind " + encoders::to_string(job.arch.kind) + " does not match algo " +
                      to_string(job.algo));
  }
  if (job.checkpoint.empty()) throw UsageError("train needs a checkpoint path");
  const nlohmann::json scenario = dataset.header.value("scenario", nlohmann::json::object());

  const ReplayBuffer buffer(dataset.transitions, job.arch, job.graph);
  Trainer trainer(job.arch, job.train, job.seed);
  TrainOutcome outcome;

  std::ofstream log;
  if (!job.loss_log.empty()) {
    log.open(job.loss_log, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot open loss log '" + job.loss_log.string() + "'");
    log << "# config: " << job.provenance.dump() << "\nstep,loss\n";
  }

  double window = 0.0;
  std::size_t window_count = 0;
  for (std::size_t s = 1; s <= job.train.steps; ++s) {
    window += trainer.train_step(buffer);
    ++window_count;
    if (s % job.train.log_every == 0) {
      const double mean = window / static_cast<double>(window_count);
      outcome.loss_log.emplace_back(s, mean);
      if (log.is_open()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", s, mean);
        log << buf << std::flush;
      }
      if (progress) progress(s, mean);
      window = 0.0;
      window_count = 0;
    }
    if (job.snapshots && job.train.snapshot_every > 0 && s % job.train.snapshot_every == 0 && s < job.train.steps) {
      const auto path = snapshot_path(job.checkpoint, s);
      nn::save_checkpoint(path, make_checkpoint(trainer, job, scenario));
      outcome.snapshots.push_back(path);
    }
  }
  if (log.is_open() && !log) throw IoError("write to loss log '" + job.loss_log.string() + "' failed");
  nn::save_checkpoint(job.checkpoint, make_checkpoint(trainer, job, scenario));
  return outcome;
}

LoadedPolicy load_policy(const std::filesystem::path& path) {
  const auto ck = nn::load_checkpoint(path);
  if (ck.metadata.value("format", "") != kCheckpointFormat) {
    throw ConfigError("'" + path.string() + "' is not a Q-network checkpoint");
  }
  LoadedPolicy p;
  p.metadata = ck.metadata;
  try {
    p.algo = parse_algo(ck.metadata.at("algo").get<std::string>());
    const auto arch = ck.metadata.at("architecture").get<encoders::ArchitectureConfig>();
    p.graph = graph_options_from_json(ck.metadata.at("graph"));
    const auto& scenario = ck.metadata.at("scenario");
    p.scenario = scenario.empty() ? sim::ScenarioConfig::highway()
                                  : sim::scenario_from_json(scenario, sim::ScenarioConfig::highway());
    p.net = std::make_unique<encoders::QNetwork<float>>(arch, 0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint metadata incomplete: " + std::string(e.what()));
  }
  auto params = p.net->named_parameters();
  nn::restore_parameters(ck, "online_a", params);
  return p;
}

sim::Action greedy_policy_action(const encoders::QNetwork<float>& net, const encoders::GraphOptions& graph,
                                 const sim::SimWorld& world) {
  nn::NoGradGuard no_grad;
  const auto prepared = encoders::prepare_scene(sim::extract_features(world), net.config(), graph);
  const auto q = net.forward(encoders::make_batch<float>(prepared, net.config()));
  return sim::action_from_index(encoders::greedy_action(q.values()));
}

double Report::overall_mean_speed() const {
  std::vector<double> v;
  for (const auto& e : episodes) v.push_back(e.mean_speed);
  return mean_of(v);
}

double Report::overall_fast_lane_fraction() const {
  std::vector<double> v;
  for (const auto& e : episodes) v.push_back(e.fast_lane_fraction);
  return mean_of(v);
}

Report evaluate_policy(const EvaluateConfig& config, const std::string& name, const PolicyFn& policy) {
  config.scenario.validate();
  if (config.vehicle_counts.empty()) throw ConfigError("evaluation needs at least one vehicle count");
  if (config.episodes_per_count < 1 || config.episode_length < 1) {
    throw ConfigError("episodes_per_count and episode_length must be >= 1");
  }
  Report report;
  report.policy = name;
  for (const int n : config.vehicle_counts) {
    std::vector<double> speed, lc, fast, gate;
    double reward_sum = 0.0;
    for (int e = 0; e < config.episodes_per_count; ++e) {
      const auto index = static_cast<std::uint64_t>(n) * 1'000'000ULL + static_cast<std::uint64_t>(e);
      auto world = sim::spawn_scenario(config.scenario, n, derive_seed(config.seed, "eval_world", index));
      auto rng = make_rng(config.seed, "eval_policy", index);
      double rewards = 0.0;
      for (int k = 0; k < config.episode_length; ++k) rewards += world.step(policy(world, rng)).reward;
      const auto& st = world.stats();
      EpisodeMetrics m;
      m.vehicles = n;
      m.episode = e;
      m.mean_speed = st.speed_sum / static_cast<double>(st.ticks);
      m.lane_changes_per_km = st.distance_m > 0.0 ? static_cast<double>(st.lane_changes) / (st.distance_m / 1000.0) : 0.0;
      m.fast_lane_fraction = static_cast<double>(st.fast_lane_ticks) / static_cast<double>(st.ticks);
      m.gate_overrides = static_cast<double>(st.gate_overrides);
      m.mean_reward = rewards / config.episode_length;
      report.episodes.push_back(m);
      speed.push_back(m.mean_speed);
      lc.push_back(m.lane_changes_per_km);
      fast.push_back(m.fast_lane_fraction);
      gate.push_back(m.gate_overrides);
      reward_sum += m.mean_reward;
    }
    DensityRow row;
    row.vehicles = n;
    row.mean_speed = mean_of(speed);
    row.std_speed = std_of(speed);
    row.lane_changes_per_km = mean_of(lc);
    row.std_lane_changes_per_km = std_of(lc);
    row.fast_lane_fraction = mean_of(fast);
    row.std_fast_lane_fraction = std_of(fast);
    row.gate_overrides = mean_of(gate);
    row.std_gate_overrides = std_of(gate);
    row.mean_reward = reward_sum / config.episodes_per_count;
    report.rows.push_back(row);
  }
  return report;
}

Report evaluate_baseline(const EvaluateConfig& config, sim::PolicyMode mode) {
  return evaluate_policy(config, sim::to_string(mode),
                         [mode](const sim::SimWorld& w, Rng& rng) { return sim::rule_based_policy(w, mode, rng); });
}

Report evaluate_checkpoint(const EvaluateConfig& config, const LoadedPolicy& policy) {
  const auto& arch = policy.net->config();
  if (arch.static_dim != config.scenario.static_dim()) {
    throw ConfigError("checkpoint expects " + std::to_string(arch.static_dim) + " static features, scenario provides " +
                      std::to_string(config.scenario.static_dim()));
  }
  for (const auto type : arch.object_types) {
    if (type == ObjectType::lane && config.scenario.kind != sim::ScenarioKind::fast_lanes) {
      throw ConfigError("checkpoint network reads lane objects, which the " + sim::to_string(config.scenario.kind) +
                        " scenario does not provide");
    }
  }
  const auto& net = *policy.net;
  const auto graph = policy.graph;
  return evaluate_policy(config, to_string(policy.algo), [&net, graph](const sim::SimWorld& w, Rng&) {
    return greedy_policy_action(net, graph, w);
  });
}

nlohmann::json report_to_json(const Report& report, const EvaluateConfig& config, const nlohmann::json& provenance) {
  nlohmann::json j;
  j["format"] = kReportFormat;
  j["version"] = 1;
  j["policy"] = report.policy;
  j["scenario"] = sim::scenario_to_json(config.scenario);
  j["evaluation"] = {{"vehicle_counts", config.vehicle_counts},
                     {"episodes_per_count", config.episodes_per_count},
                     {"episode_length", config.episode_length},
                     {"seed", config.seed}};
  j["config"] = provenance;
  const bool fast = config.scenario.kind == sim::ScenarioKind::fast_lanes;
  auto col = [&](auto getter) {
    auto arr = nlohmann::json::array();
    for (const auto& r : report.rows) arr.push_back(getter(r));
    return arr;
  };
  j["density"] = col([](const DensityRow& r) { return r.vehicles; });
  j["mean_speed"] = col([](const DensityRow& r) { return r.mean_speed; });
  j["std_speed"] = col([](const DensityRow& r) { return r.std_speed; });
  j["lane_changes_per_km"] = col([](const DensityRow& r) { return r.lane_changes_per_km; });
  j["std_lane_changes_per_km"] = col([](const DensityRow& r) { return r.std_lane_changes_per_km; });
  if (fast) {
    j["fast_lane_fraction"] = col([](const DensityRow& r) { return r.fast_lane_fraction; });
    j["std_fast_lane_fraction"] = col([](const DensityRow& r) { return r.std_fast_lane_fraction; });
  }
  j["gate_overrides"] = col([](const DensityRow& r) { return r.gate_overrides; });
  j["std_gate_overrides"] = col([](const DensityRow& r) { return r.std_gate_overrides; });
  j["mean_reward"] = col([](const DensityRow& r) { return r.mean_reward; });
  auto episodes = nlohmann::json::array();
  for (const auto& e : report.episodes) {
    nlohmann::json row{{"vehicles", e.vehicles},
                       {"episode", e.episode},
                       {"mean_speed", e.mean_speed},
                       {"lane_changes_per_km", e.lane_changes_per_km},
                       {"gate_overrides", e.gate_overrides},
                       {"mean_reward", e.mean_reward}};
    if (fast) row["fast_lane_fraction"] = e.fast_lane_fraction;
    episodes.push_back(std::move(row));
  }
  j["episodes"] = std::move(episodes);
  j["overall_mean_speed"] = report.overall_mean_speed();
  if (fast) j["overall_fast_lane_fraction"] = report.overall_fast_lane_fraction();
  return j;
}

void write_report(const std::filesystem::path& path, const nlohmann::json& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open report '" + path.string() + "' for writing");
  out << report.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write to report '" + path.string() + "' failed");
}

}  // namespace deepscene::rl
