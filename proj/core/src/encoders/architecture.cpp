#include "deepscene/encoders/architecture.hpp"

#include <set>

#include "deepscene/errors.hpp"

namespace deepscene::encoders {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::deepset: return "deepset";
    case EncoderKind::deepscene_set: return "deepscene_set";
    case EncoderKind::gcn: return "gcn";
    case EncoderKind::deepscene_graph: return "deepscene_graph";
    case EncoderKind::vbin: return "vbin";
    case EncoderKind::multi_rho: return "multi_rho";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  for (const auto kind : {EncoderKind::deepset, EncoderKind::deepscene_set, EncoderKind::gcn,
                          EncoderKind::deepscene_graph, EncoderKind::vbin, EncoderKind::multi_rho}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown encoder kind '" + name + "'");
}

ArchitectureConfig ArchitectureConfig::defaults(EncoderKind kind) {
  ArchitectureConfig c;
  c.kind = kind;
  switch (kind) {
    case EncoderKind::deepset:
      break;
    case EncoderKind::gcn:
      c.gcn_widths = {80};
      c.rho_widths = {};
      break;
    case EncoderKind::vbin:
      c.q_widths = {200, 100};
      break;
    case EncoderKind::deepscene_set:
    case EncoderKind::multi_rho:
      c.object_types = {ObjectType::vehicle, ObjectType::lane};
      c.object_dims = {kVehicleFeatures, kLaneFeatures};
      c.phi_widths = {20, 80, 80};
      c.rho_widths = {80, 80};
      break;
    case EncoderKind::deepscene_graph:
      c.object_types = {ObjectType::vehicle, ObjectType::lane};
      c.object_dims = {kVehicleFeatures, kLaneFeatures};
      c.phi_widths = {20, 80, 80};
      c.gcn_widths = {80};
      c.rho_widths = {};
      break;
  }
  return c;
}

std::size_t ArchitectureConfig::phi_out() const {
  return phi_widths.empty() ? object_dims.at(0) : phi_widths.back();
}

void ArchitectureConfig::validate() const {
  if (object_types.empty()) throw ConfigError("architecture needs at least one object type");
  if (object_types.size() != object_dims.size()) {
    throw ConfigError("object_types and object_dims differ in length");
  }
  std::set<ObjectType> unique(object_types.begin(), object_types.end());
  if (unique.size() != object_types.size()) throw ConfigError("duplicate object type");
  if (!typed() && object_types.size() != 1) {
    throw ConfigError(to_string(kind) + " encodes a single object type");
  }
  if (phi_widths.empty()) throw ConfigError("phi needs at least one layer");
  if (typed() && shared_last_layer) {
    for (std::size_t k = 1; k < object_dims.size(); ++k) {
      if (object_dims[k] != object_dims[0] && phi_widths.size() < 2) {
        throw ConfigError("a shared last phi layer with differing input dims needs >= 2 layers");
      }
    }
  }
  if (uses_graph() && gcn_widths.empty()) throw ConfigError(to_string(kind) + " needs GCN layers");
  if (!uses_graph() && !gcn_widths.empty()) {
    throw ConfigError(to_string(kind) + " does not take GCN layers");
  }
  if (num_actions == 0) throw ConfigError("num_actions must be positive");
  for (const auto* widths : {&phi_widths, &gcn_widths, &rho_widths, &q_widths}) {
    for (const auto w : *widths) {
      if (w == 0) throw ConfigError("layer widths must be positive");
    }
  }
}

void to_json(nlohmann::json& j, const ArchitectureConfig& c) {
  std::vector<std::string> types;
  for (const auto t : c.object_types) types.push_back(to_string(t));
  j = nlohmann::json{
      {"kind", to_string(c.kind)},
      {"object_types", types},
      {"object_dims", c.object_dims},
      {"static_dim", c.static_dim},
      {"phi_widths", c.phi_widths},
      {"shared_last_layer", c.shared_last_layer},
      {"gcn_widths", c.gcn_widths},
      {"gcn_activation", c.gcn_activation == nn::Activation::relu ? "relu" : "linear"},
      {"normalization", graph::to_string(c.normalization)},
      {"rho_widths", c.rho_widths},
      {"q_widths", c.q_widths},
      {"num_actions", c.num_actions},
      {"pooling", c.pooling == Pooling::sum ? "sum" : "max"},
  };
}

void from_json(const nlohmann::json& j, ArchitectureConfig& c) {
  static const std::set<std::string> kKeys{
      "kind",         "object_types", "object_dims",   "static_dim", "phi_widths",
      "shared_last_layer", "gcn_widths", "gcn_activation", "normalization", "rho_widths",
      "q_widths",     "num_actions",  "pooling"};
  if (!j.is_object()) throw ConfigError("architecture must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown architecture key '" + key + "'");
  }
  try {
    // Defaults of the named kind first, explicit keys override.
    c = ArchitectureConfig::defaults(parse_encoder_kind(j.value("kind", to_string(c.kind))));
    if (j.contains("object_types")) {
      c.object_types.clear();
      for (const auto& t : j.at("object_types")) c.object_types.push_back(parse_object_type(t));
    }
    if (j.contains("object_dims")) c.object_dims = j.at("object_dims").get<std::vector<std::size_t>>();
    if (j.contains("static_dim")) c.static_dim = j.at("static_dim").get<std::size_t>();
    if (j.contains("phi_widths")) c.phi_widths = j.at("phi_widths").get<std::vector<std::size_t>>();
    if (j.contains("shared_last_layer")) c.shared_last_layer = j.at("shared_last_layer").get<bool>();
    if (j.contains("gcn_widths")) c.gcn_widths = j.at("gcn_widths").get<std::vector<std::size_t>>();
    if (j.contains("gcn_activation")) {
      const auto a = j.at("gcn_activation").get<std::string>();
      if (a != "relu" && a != "linear") throw ConfigError("gcn_activation must be relu or linear");
      c.gcn_activation = a == "relu" ? nn::Activation::relu : nn::Activation::linear;
    }
    if (j.contains("normalization")) {
      c.normalization = graph::parse_normalization(j.at("normalization").get<std::string>());
    }
    if (j.contains("rho_widths")) c.rho_widths = j.at("rho_widths").get<std::vector<std::size_t>>();
    if (j.contains("q_widths")) c.q_widths = j.at("q_widths").get<std::vector<std::size_t>>();
    if (j.contains("num_actions")) c.num_actions = j.at("num_actions").get<std::size_t>();
    if (j.contains("pooling")) {
      const auto p = j.at("pooling").get<std::string>();
      if (p != "sum" && p != "max") throw ConfigError("pooling must be sum or max");
      c.pooling = p == "sum" ? Pooling::sum : Pooling::max;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid architecture config: ") + e.what());
  }
  c.validate();
}

}  // namespace deepscene::encoders
