#include "deepscene/tools/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "deepscene/encoders/batch.hpp"
#include "deepscene/errors.hpp"
#include "deepscene/tools/run_config.hpp"

namespace deepscene::tools {

namespace {

using nlohmann::json;

// Flag values; only flags the user actually passed are applied.
struct Flags {
  std::string config;
  std::string scenario;
  std::uint64_t seed = 0;
  double p_lc = 0.0;
  std::string out;

  std::size_t transitions = 0;
  std::string vehicles;
  int episode_length = 0;

  std::string dataset;
  std::string algo;
  std::string graph;
  std::size_t steps = 0;
  double lr = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  std::size_t batch = 0;
  std::size_t log_every = 0;
  std::size_t snapshot_every = 0;
  std::string loss_log;
  bool no_snapshots = false;
  bool quiet = false;

  std::string checkpoint;
  std::string baseline;
  std::string densities;
  int episodes = 0;

  int n_vehicles = 0;
};

bool given(const CLI::App* app, const std::string& name) {
  const auto* opt = app->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

// Defaults, then the config file, then the flags.
json effective_config(const CLI::App* app, const Flags& f) {
  auto config = f.config.empty() ? default_run_config() : load_run_config(f.config);
  json o = json::object();
  if (given(app, "--seed")) o["seed"] = f.seed;
  if (given(app, "--scenario")) o["scenario"]["preset"] = f.scenario;
  if (given(app, "--p-lc")) o["scenario"]["overrides"]["lane_change_penalty"] = f.p_lc;
  if (given(app, "--transitions")) o["collect"]["transitions"] = f.transitions;
  if (given(app, "--vehicles")) {
    const auto [lo, hi] = parse_vehicle_range(f.vehicles);
    o["collect"]["min_vehicles"] = lo;
    o["collect"]["max_vehicles"] = hi;
  }
  if (given(app, "--episode-length")) {
    o[app->get_name() == "collect" ? "collect" : "evaluate"]["episode_length"] = f.episode_length;
  }
  if (given(app, "--algo")) o["algo"] = rl::to_string(rl::parse_algo(f.algo));
  if (given(app, "--graph")) o["graph"]["strategy"] = f.graph;
  if (given(app, "--steps")) o["train"]["steps"] = f.steps;
  if (given(app, "--lr")) o["train"]["learning_rate"] = f.lr;
  if (given(app, "--gamma")) o["train"]["gamma"] = f.gamma;
  if (given(app, "--tau")) o["train"]["tau"] = f.tau;
  if (given(app, "--batch")) o["train"]["batch_size"] = f.batch;
  if (given(app, "--log-every")) o["train"]["log_every"] = f.log_every;
  if (given(app, "--snapshot-every")) o["train"]["snapshot_every"] = f.snapshot_every;
  if (given(app, "--densities")) o["evaluate"]["densities"] = f.densities;
  if (given(app, "--episodes")) o["evaluate"]["episodes"] = f.episodes;
  merge_config(config, o);
  return config;
}

bool scenario_explicit(const CLI::App* app, const Flags& f) {
  if (given(app, "--scenario")) return true;
  if (f.config.empty()) return false;
  std::ifstream in(f.config);
  const auto file = json::parse(in, nullptr, false);
  return file.is_object() && file.contains("scenario");
}

int cmd_collect(const CLI::App* app, const Flags& f, std::ostream& out) {
  const auto config = effective_config(app, f);
  const auto collect = resolve_collect(config);
  sim::collect_dataset(collect, f.out, config);
  out << "wrote " << collect.transitions << " transitions to " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const CLI::App* app, const Flags& f, std::ostream& out, std::ostream& err) {
  auto config = effective_config(app, f);
  const auto dataset = sim::read_dataset(f.dataset);
  // The network must read the scenes the dataset was recorded with.
  const auto scenario = sim::scenario_from_json(dataset.header.value("scenario", json::object()),
                                                sim::ScenarioConfig::preset("highway"));

  rl::TrainJob job;
  job.algo = rl::parse_algo(config.at("algo").get<std::string>());
  job.arch = resolve_architecture(config, scenario);
  job.graph = resolve_graph(config);
  job.train = resolve_train(config);
  job.seed = config.at("seed").get<std::uint64_t>();
  job.checkpoint = f.out;
  job.loss_log = f.loss_log;
  job.snapshots = !f.no_snapshots;
  job.provenance = config;
  job.provenance["dataset"] = {{"path", f.dataset}, {"header", dataset.header}};

  std::function<void(std::size_t, double)> progress;
  if (!f.quiet) {
    progress = [&err](std::size_t step, double loss) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "step %zu loss %.6g\n", step, loss);
      err << buf << std::flush;
    };
  }
  const auto outcome = rl::train(job, dataset, progress);
  out << "wrote checkpoint " << f.out << " after " << job.train.steps << " steps";
  if (!outcome.snapshots.empty()) out << " (" << outcome.snapshots.size() << " snapshots)";
  out << "\n";
  return kExitOk;
}

int cmd_evaluate(const CLI::App* app, const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty() == f.baseline.empty()) {
    throw UsageError("evaluate needs exactly one of --checkpoint or --baseline");
  }
  const auto config = effective_config(app, f);
  rl::Report report;
  rl::EvaluateConfig eval;
  json provenance = config;
  if (!f.baseline.empty()) {
    const auto mode = sim::parse_policy_mode(f.baseline);
    eval = resolve_evaluate(config, resolve_scenario(config));
    report = rl::evaluate_baseline(eval, mode);
  } else {
    const auto policy = rl::load_policy(f.checkpoint);
    const auto scenario = scenario_explicit(app, f) ? resolve_scenario(config) : policy.scenario;
    eval = resolve_evaluate(config, scenario);
    provenance["checkpoint"] = {{"path", f.checkpoint}, {"metadata", policy.metadata}};
    report = rl::evaluate_checkpoint(eval, policy);
  }
  rl::write_report(f.out, rl::report_to_json(report, eval, provenance));

  const bool fast = eval.scenario.kind == sim::ScenarioKind::fast_lanes;
  out << "policy " << report.policy << "\n";
  out << "vehicles  mean_speed  std_speed  lc_per_km" << (fast ? "  fast_lane" : "") << "\n";
  for (const auto& row : report.rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%8d  %10.3f  %9.3f  %9.3f", row.vehicles, row.mean_speed, row.std_speed,
                  row.lane_changes_per_km);
    out << buf;
    if (fast) {
      std::snprintf(buf, sizeof(buf), "  %9.3f", row.fast_lane_fraction);
      out << buf;
    }
    out << "\n";
  }
  out << "wrote report " << f.out << "\n";
  return kExitOk;
}

// Spawns one world and prints the adjacency the graph encoders would see.
int cmd_adjacency(const CLI::App* app, const Flags& f, std::ostream& out) {
  const auto config = effective_config(app, f);
  const auto scenario = resolve_scenario(config);
  const auto world = sim::spawn_scenario(scenario, f.n_vehicles, config.at("seed").get<std::uint64_t>());
  const auto scene = sim::extract_features(world);
  auto options = resolve_graph(config);
  const auto adjacency = encoders::scene_adjacency(scene, options);
  const auto text = adjacency.to_text();
  if (f.out.empty()) {
    out << text;
  } else {
    std::ofstream file(f.out, std::ios::binary);
    if (!(file << text)) throw IoError("cannot write '" + f.out + "'");
  }
  return kExitOk;
}

int cmd_config(const CLI::App* app, const Flags& f, std::ostream& out) {
  out << effective_config(app, f).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene-encoder Q-learning for highway lane changes"};
  app.require_subcommand(1);
  Flags f;

  const auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration (flags override it)");
    sub->add_option("--seed", f.seed, "Root seed");
    sub->add_option("--scenario", f.scenario, "highway | fast_lanes | desk_highway | desk_fast_lanes");
  };

  auto* collect = app.add_subcommand("collect", "Record transitions of the random lane-change collector");
  common(collect);
  collect->add_option("--out", f.out, "Dataset file (JSON lines)")->required();
  collect->add_option("--transitions", f.transitions, "Number of transitions");
  collect->add_option("--vehicles", f.vehicles, "Vehicle count range lo:hi per episode");
  collect->add_option("--episode-length", f.episode_length, "Decisions per episode");
  collect->add_option("--p-lc", f.p_lc, "Lane-change penalty in the reward");

  auto* train = app.add_subcommand("train", "Train a Q-network offline on a dataset");
  common(train);
  train->add_option("--dataset", f.dataset, "Dataset file from `collect`")->required();
  train->add_option("--out", f.out, "Final checkpoint")->required();
  train->add_option("--algo", f.algo,
                    "deepset-q | graph-q | deepscene-q-set | deepscene-q-graph | vbin-q | multi-rho-q");
  train->add_option("--graph", f.graph, "Adjacency strategy: all_close | close_agent");
  train->add_option("--steps", f.steps, "Optimization steps");
  train->add_option("--lr", f.lr, "Adam learning rate");
  train->add_option("--gamma", f.gamma, "Discount factor");
  train->add_option("--tau", f.tau, "Soft target update rate");
  train->add_option("--batch", f.batch, "Minibatch size");
  train->add_option("--log-every", f.log_every, "Loss logging interval");
  train->add_option("--snapshot-every", f.snapshot_every, "Snapshot interval (0 = none)");
  train->add_option("--loss-log", f.loss_log, "CSV loss log");
  train->add_flag("--no-snapshots", f.no_snapshots, "Write only the final checkpoint");
  train->add_flag("--quiet", f.quiet, "No progress output");

  auto* evaluate = app.add_subcommand("evaluate", "Run greedy or baseline policies over a density sweep");
  common(evaluate);
  evaluate->add_option("--out", f.out, "Report file (JSON)")->required();
  auto* ck = evaluate->add_option("--checkpoint", f.checkpoint, "Checkpoint from `train`");
  auto* bl = evaluate->add_option("--baseline", f.baseline, "rule | keep | collector (no checkpoint needed)");
  ck->excludes(bl);
  evaluate->add_option("--densities", f.densities, "Vehicle counts: start:stop:step or a,b,c");
  evaluate->add_option("--episodes", f.episodes, "Episodes per density");
  evaluate->add_option("--episode-length", f.episode_length, "Decisions per episode");

  auto* adjacency = app.add_subcommand("adjacency", "Print the adjacency of a freshly spawned scene");
  common(adjacency);
  adjacency->add_option("--count", f.n_vehicles, "Vehicles to spawn")->required();
  adjacency->add_option("--graph", f.graph, "all_close | close_agent");
  adjacency->add_option("--out", f.out, "Write to a file instead of stdout");

  auto* config = app.add_subcommand("config", "Print the effective configuration");
  common(config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*collect) return cmd_collect(collect, f, out);
    if (*train) return cmd_train(train, f, out, err);
    if (*evaluate) return cmd_evaluate(evaluate, f, out);
    if (*adjacency) return cmd_adjacency(adjacency, f, out);
    if (*config) return cmd_config(config, f, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PlacementError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace deepscene::tools
