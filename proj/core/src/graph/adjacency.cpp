#include "deepscene/graph/adjacency.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "deepscene/errors.hpp"

namespace deepscene::graph {

WeightedAdjacency::WeightedAdjacency(std::vector<std::int64_t> node_ids)
    : n_(node_ids.size()), weights_(n_ * n_, 0.0), node_ids_(std::move(node_ids)) {
  for (std::size_t i = 0; i < n_; ++i) weights_[i * n_ + i] = 1.0;
}

void WeightedAdjacency::set_edge(std::size_t i, std::size_t j, double weight) {
  if (i >= n_ || j >= n_) throw InvariantError("adjacency edge index out of range");
  if (i == j) return;
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw InvariantError("adjacency edge weight must be finite and non-negative");
  }
  weights_[i * n_ + j] = weight;
  weights_[j * n_ + i] = weight;
}

std::size_t WeightedAdjacency::edge_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) count += weights_[i * n_ + j] != 0.0 ? 1 : 0;
  }
  return count;
}

void WeightedAdjacency::validate() const {
  if (node_ids_.size() != n_ || weights_.size() != n_ * n_) {
    throw InvariantError("adjacency storage does not match node count");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (at(i, i) != 1.0) throw InvariantError("adjacency diagonal must be 1");
    for (std::size_t j = 0; j < n_; ++j) {
      const double w = at(i, j);
      if (!std::isfinite(w) || w < 0.0) throw InvariantError("adjacency weight invalid");
      if (w != at(j, i)) throw InvariantError("adjacency is not symmetric");
    }
  }
}

std::string WeightedAdjacency::to_text() const {
  std::ostringstream out;
  out << "nodes:";
  for (const auto id : node_ids_) out << ' ' << id;
  out << '\n' << std::setprecision(6);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) out << (j ? " " : "") << at(i, j);
    out << '\n';
  }
  return out.str();
}

double edge_weight(double distance_m, double d_floor) {
  return 1.0 / std::max(std::abs(distance_m), d_floor);
}

double signed_distance(double from_m, double to_m, double ring_length) {
  double d = to_m - from_m;
  if (ring_length > 0.0) {
    d = std::fmod(d, ring_length);
    if (d < -0.5 * ring_length) d += ring_length;
    if (d >= 0.5 * ring_length) d -= ring_length;
  }
  return d;
}

LaneNeighbors lane_neighbors(std::span<const GraphVehicle> vehicles, std::size_t index,
                             int lane_offset, const GraphConfig& config) {
  LaneNeighbors result;
  const auto& self = vehicles[index];
  const int lane = self.lane + lane_offset;
  double best_ahead = 0.0;
  double best_behind = 0.0;
  for (std::size_t j = 0; j < vehicles.size(); ++j) {
    if (j == index || vehicles[j].lane != lane) continue;
    const double d = signed_distance(self.position_m, vehicles[j].position_m, config.ring_length);
    if (std::abs(d) > config.d_max) continue;
    if (d >= 0.0) {
      if (!result.leader || d < best_ahead ||
          (d == best_ahead && vehicles[j].id < vehicles[*result.leader].id)) {
        result.leader = j;
        best_ahead = d;
      }
    } else {
      const double back = -d;
      if (!result.follower || back < best_behind ||
          (back == best_behind && vehicles[j].id < vehicles[*result.follower].id)) {
        result.follower = j;
        best_behind = back;
      }
    }
  }
  return result;
}

std::array<std::optional<std::size_t>, 6> surrounding_slots(std::span<const GraphVehicle> vehicles,
                                                            std::size_t index,
                                                            const GraphConfig& config) {
  std::array<std::optional<std::size_t>, 6> slots;
  constexpr std::array<int, 3> kOffsets{0, +1, -1};
  for (std::size_t k = 0; k < kOffsets.size(); ++k) {
    const auto nb = lane_neighbors(vehicles, index, kOffsets[k], config);
    slots[2 * k] = nb.leader;
    slots[2 * k + 1] = nb.follower;
  }
  return slots;
}

namespace {

std::vector<std::int64_t> ids_of(std::span<const GraphVehicle> vehicles) {
  std::vector<std::int64_t> ids;
  ids.reserve(vehicles.size());
  for (const auto& v : vehicles) ids.push_back(v.id);
  return ids;
}

void connect_neighbors(WeightedAdjacency& adj, std::span<const GraphVehicle> vehicles,
                       std::size_t index, const GraphConfig& config) {
  for (const auto& slot : surrounding_slots(vehicles, index, config)) {
    if (!slot) continue;
    const double d = signed_distance(vehicles[index].position_m, vehicles[*slot].position_m,
                                     config.ring_length);
    adj.set_edge(index, *slot, config.use_edge_weights ? edge_weight(d, config.d_floor) : 1.0);
  }
}

}  // namespace

WeightedAdjacency build_close_agent(std::span<const GraphVehicle> vehicles, std::int64_t agent_id,
                                    const GraphConfig& config) {
  const auto it = std::find_if(vehicles.begin(), vehicles.end(),
                               [&](const GraphVehicle& v) { return v.id == agent_id; });
  if (it == vehicles.end()) {
    throw InvariantError("agent id " + std::to_string(agent_id) + " not in vehicle list");
  }
  WeightedAdjacency adj(ids_of(vehicles));
  connect_neighbors(adj, vehicles, static_cast<std::size_t>(it - vehicles.begin()), config);
  return adj;
}

WeightedAdjacency build_all_close(std::span<const GraphVehicle> vehicles, const GraphConfig& config) {
  WeightedAdjacency adj(ids_of(vehicles));
  // A↔B found from both ends carries the same distance, so the second write is a no-op.
  for (std::size_t i = 0; i < vehicles.size(); ++i) connect_neighbors(adj, vehicles, i, config);
  return adj;
}

WeightedAdjacency build(Strategy strategy, std::span<const GraphVehicle> vehicles,
                        const GraphConfig& config) {
  if (strategy == Strategy::all_close) return build_all_close(vehicles, config);
  const auto agent = std::find_if(vehicles.begin(), vehicles.end(),
                                  [](const GraphVehicle& v) { return v.is_agent; });
  if (agent == vehicles.end()) throw InvariantError("close_agent graph needs an agent vehicle");
  return build_close_agent(vehicles, agent->id, config);
}

std::vector<double> normalize(const WeightedAdjacency& adjacency, Normalization mode) {
  const std::size_t n = adjacency.size();
  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) degree += adjacency.at(i, j);
    scale[i] = mode == Normalization::inverse_sqrt ? 1.0 / std::sqrt(degree) : std::sqrt(degree);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = scale[i] * adjacency.at(i, j) * scale[j];
  }
  return out;
}

Strategy parse_strategy(const std::string& name) {
  if (name == "close_agent" || name == "close-agent") return Strategy::close_agent;
  if (name == "all_close" || name == "all-close") return Strategy::all_close;
  throw ConfigError("unknown graph strategy '" + name + "' (expected close_agent or all_close)");
}

std::string to_string(Strategy strategy) {
  return strategy == Strategy::close_agent ? "close_agent" : "all_close";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "inverse_sqrt") return Normalization::inverse_sqrt;
  if (name == "sqrt") return Normalization::sqrt;
  throw ConfigError("unknown normalization '" + name + "' (expected inverse_sqrt or sqrt)");
}

std::string to_string(Normalization mode) {
  return mode == Normalization::inverse_sqrt ? "inverse_sqrt" : "sqrt";
}

}  // namespace deepscene::graph
