#include "deepscene/tools/run_config.hpp"

#include <charconv>
#include <fstream>

#include "deepscene/errors.hpp"

namespace deepscene::tools {

namespace {

bool is_desk(const std::string& preset) { return preset.rfind("desk_", 0) == 0; }

bool free_form(const std::string& where) { return where == "scenario.overrides" || where == "network"; }

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad " + what + " '" + text + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

nlohmann::json default_run_config() {
  nlohmann::json train = rl::TrainConfig{};
  return {
      {"seed", 0},
      {"scenario", {{"preset", "highway"}, {"overrides", nlohmann::json::object()}}},
      {"algo", "deepset_q"},
      {"graph", rl::graph_options_to_json(encoders::GraphOptions{})},
      {"network", nlohmann::json::object()},
      {"train", train},
      {"collect",
       {{"transitions", 500000}, {"min_vehicles", nullptr}, {"max_vehicles", nullptr}, {"episode_length", 200}}},
      {"evaluate", {{"densities", nullptr}, {"episodes", 20}, {"episode_length", 200}}},
  };
}

void merge_config(nlohmann::json& base, const nlohmann::json& overrides, const std::string& where) {
  if (!overrides.is_object()) {
    throw ConfigError((where.empty() ? std::string("config") : where) + " must be a JSON object");
  }
  for (const auto& [key, value] : overrides.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (free_form(where)) {
      base[key] = value;
      continue;
    }
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_config(slot, value, path);
    } else {
      slot = value;
    }
  }
}

nlohmann::json load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  nlohmann::json file;
  try {
    file = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto config = default_run_config();
  merge_config(config, file);
  return config;
}

sim::ScenarioConfig resolve_scenario(const nlohmann::json& config) {
  const auto& s = config.at("scenario");
  try {
    auto scenario = sim::scenario_from_json(s.at("overrides"), sim::ScenarioConfig::preset(s.at("preset").get<std::string>()));
    scenario.validate();
    return scenario;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scenario config: ") + e.what());
  }
}

sim::CollectConfig resolve_collect(const nlohmann::json& config) {
  const auto& c = config.at("collect");
  const auto preset = config.at("scenario").at("preset").get<std::string>();
  sim::CollectConfig out;
  out.scenario = resolve_scenario(config);
  try {
    out.transitions = c.at("transitions").get<std::size_t>();
    const bool fast = out.scenario.kind == sim::ScenarioKind::fast_lanes;
    out.min_vehicles = c.at("min_vehicles").is_null() ? (is_desk(preset) ? 8 : 30) : c.at("min_vehicles").get<int>();
    out.max_vehicles =
        c.at("max_vehicles").is_null() ? (is_desk(preset) ? 16 : (fast ? 90 : 60)) : c.at("max_vehicles").get<int>();
    out.episode_length = c.at("episode_length").get<int>();
    out.seed = config.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad collect config: ") + e.what());
  }
  if (out.transitions < 1) throw ConfigError("collect.transitions must be >= 1");
  if (out.min_vehicles < 1 || out.max_vehicles < out.min_vehicles) {
    throw ConfigError("vehicle range must satisfy 1 <= min <= max");
  }
  if (out.episode_length < 1) throw ConfigError("collect.episode_length must be >= 1");
  return out;
}

encoders::GraphOptions resolve_graph(const nlohmann::json& config) {
  return rl::graph_options_from_json(config.at("graph"));
}

encoders::ArchitectureConfig resolve_architecture(const nlohmann::json& config, const sim::ScenarioConfig& scenario) {
  const auto algo = rl::parse_algo(config.at("algo").get<std::string>());
  nlohmann::json arch = rl::default_architecture(algo, scenario);
  for (const auto& [key, value] : config.at("network").items()) {
    if (!arch.contains(key)) throw ConfigError("unknown network key '" + key + "'");
    if (key == "kind") throw ConfigError("network.kind follows from algo and cannot be set");
    arch[key] = value;
  }
  auto out = arch.get<encoders::ArchitectureConfig>();
  out.validate();
  return out;
}

rl::TrainConfig resolve_train(const nlohmann::json& config) {
  auto t = config.at("train").get<rl::TrainConfig>();
  t.validate();
  return t;
}

rl::EvaluateConfig resolve_evaluate(const nlohmann::json& config, const sim::ScenarioConfig& scenario) {
  const auto& e = config.at("evaluate");
  const auto preset = config.at("scenario").at("preset").get<std::string>();
  rl::EvaluateConfig out;
  out.scenario = scenario;
  try {
    const auto densities = e.at("densities").is_null() ? std::string(is_desk(preset) ? "8:16:2" : "30:90:5")
                                                       : e.at("densities").get<std::string>();
    out.vehicle_counts = parse_densities(densities);
    out.episodes_per_count = e.at("episodes").get<int>();
    out.episode_length = e.at("episode_length").get<int>();
    out.seed = config.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad evaluate config: ") + ex.what());
  }
  if (out.episodes_per_count < 1) throw ConfigError("evaluate.episodes must be >= 1");
  if (out.episode_length < 1) throw ConfigError("evaluate.episode_length must be >= 1");
  return out;
}

std::vector<int> parse_densities(const std::string& text) {
  std::vector<int> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("density range must be start:stop:step, got '" + text + "'");
    const int start = parse_int(parts[0], "density");
    const int stop = parse_int(parts[1], "density");
    const int step = parse_int(parts[2], "density step");
    if (step < 1 || stop < start) throw ConfigError("density range '" + text + "' is empty or has step < 1");
    for (int n = start; n <= stop; n += step) out.push_back(n);
  } else {
    for (const auto& part : split(text, ',')) out.push_back(parse_int(part, "density"));
  }
  for (const int n : out) {
    if (n < 1) throw ConfigError("vehicle counts must be >= 1");
  }
  return out;
}

std::pair<int, int> parse_vehicle_range(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw ConfigError("vehicle range must be lo:hi, got '" + text + "'");
  return {parse_int(parts[0], "vehicle count"), parse_int(parts[1], "vehicle count")};
}

}  // namespace deepscene::tools
