#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deepscene::graph {

/// Vehicle as seen by the graph builders: curvilinear position (any origin)
/// and lane index.
struct GraphVehicle {
  std::int64_t id = 0;
  double position_m = 0.0;
  int lane = 0;
  bool is_agent = false;
};

enum class Strategy : std::uint8_t {
  close_agent,  // agent ↔ its leader/follower on own, left and right lane
  all_close,    // every vehicle ↔ its leader/follower on own, left and right lane
};

/// D^(-1/2) Ã D^(-1/2) (standard GCN) or the D^(1/2) Ã D^(1/2) variant.
enum class Normalization : std::uint8_t { inverse_sqrt, sqrt };

struct GraphConfig {
  double d_max = 80.0;    // neighbour search range [m]
  double d_floor = 0.5;   // distance floor for edge weights [m]
  bool use_edge_weights = true;
  double ring_length = 0.0;  // > 0 measures distances along a ring of this length
};

/// Symmetric non-negative edge weights with unit self-connections.
class WeightedAdjacency {
 public:
  WeightedAdjacency() = default;
  /// Identity matrix over the given node ids.
  explicit WeightedAdjacency(std::vector<std::int64_t> node_ids);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return weights_[i * n_ + j]; }
  [[nodiscard]] std::span<const double> weights() const { return weights_; }
  [[nodiscard]] const std::vector<std::int64_t>& node_ids() const { return node_ids_; }

  /// Sets both (i, j) and (j, i). Self-connections stay at 1.
  void set_edge(std::size_t i, std::size_t j, double weight);

  /// Number of undirected edges, self-loops excluded.
  [[nodiscard]] std::size_t edge_count() const;

  /// Throws InvariantError unless symmetric, finite, non-negative with unit diagonal.
  void validate() const;

  [[nodiscard]] std::string to_text() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> weights_;
  std::vector<std::int64_t> node_ids_;
};

/// Inverse absolute distance, floored: 1 / max(|d|, d_floor).
double edge_weight(double distance_m, double d_floor);

/// Signed separation b − a, taking the shortest arc when ring_length > 0.
double signed_distance(double from_m, double to_m, double ring_length);

/// Leader and follower of vehicle `index` on lane (own lane + lane_offset),
/// within d_max. Leaders have d ≥ 0, followers d < 0; ties go to the lower id.
struct LaneNeighbors {
  std::optional<std::size_t> leader;
  std::optional<std::size_t> follower;
};
LaneNeighbors lane_neighbors(std::span<const GraphVehicle> vehicles, std::size_t index,
                             int lane_offset, const GraphConfig& config);

/// Slots in order: own leader, own follower, left leader, left follower,
/// right leader, right follower.
std::array<std::optional<std::size_t>, 6> surrounding_slots(std::span<const GraphVehicle> vehicles,
                                                            std::size_t index,
                                                            const GraphConfig& config);

WeightedAdjacency build_close_agent(std::span<const GraphVehicle> vehicles, std::int64_t agent_id,
                                    const GraphConfig& config);

WeightedAdjacency build_all_close(std::span<const GraphVehicle> vehicles, const GraphConfig& config);

WeightedAdjacency build(Strategy strategy, std::span<const GraphVehicle> vehicles,
                        const GraphConfig& config);

/// Dense row-major n×n propagation matrix.
std::vector<double> normalize(const WeightedAdjacency& adjacency,
                              Normalization mode = Normalization::inverse_sqrt);

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy strategy);
Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization mode);

}  // namespace deepscene::graph
