#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "deepscene/encoders/architecture.hpp"
#include "deepscene/encoders/scene.hpp"
#include "deepscene/graph/adjacency.hpp"
#include "deepscene/nn/ops.hpp"
#include "deepscene/nn/tensor.hpp"

namespace deepscene::encoders {

/// How graph encoders derive their adjacency from a scene.
struct GraphOptions {
  graph::Strategy strategy = graph::Strategy::all_close;
  graph::GraphConfig config{};
};

/// A scene plus everything an architecture needs beyond raw features,
/// computed once (replay buffers prepare each stored scene a single time).
struct PreparedScene {
  SceneState scene;
  /// Graph kinds: normalized propagation matrix over the stacked node list
  /// (types in config order, rows in set order).
  std::vector<double> propagation;
  std::size_t graph_nodes = 0;
  /// VBIN: kVbinSlots rows of (vehicle features, presence bit).
  std::vector<float> slots;
};

/// Vehicle rows of a scene as graph vertices; positions recovered from the
/// relative-distance feature (dr · d_max) and lanes from the relative lane index.
std::vector<graph::GraphVehicle> graph_vehicles(const SceneState& scene, double d_max);

/// Builds the adjacency for a scene's vehicle set with the configured strategy.
graph::WeightedAdjacency scene_adjacency(const SceneState& scene, const GraphOptions& options);

/// Prepares a scene; for graph kinds `adjacency` overrides the builder (it must
/// cover the vehicle rows).
PreparedScene prepare_scene(SceneState scene, const ArchitectureConfig& config,
                            const GraphOptions& options,
                            const graph::WeightedAdjacency* adjacency = nullptr);

/// Minibatch in the layout the networks consume.
template <typename T>
struct SceneBatch {
  std::size_t batch_size = 0;
  /// One (N_k × d_k) tensor per configured object type, samples contiguous.
  std::vector<nn::Tensor<T>> objects;
  /// Per type, B+1 row offsets into `objects[k]`.
  std::vector<std::vector<std::size_t>> offsets;
  /// Stacked node order (per sample: type 0 rows, type 1 rows, ...) as row
  /// indices into concat_rows(objects), plus its B+1 offsets.
  std::vector<std::size_t> node_rows;
  std::vector<std::size_t> node_offsets;
  /// Block-diagonal propagation matrix over the stacked node order.
  nn::SparseMatrix<T> propagation;
  /// (B·kVbinSlots × (d_vehicle + 1)) for VBIN.
  nn::Tensor<T> slots;
  /// (B × static_dim)
  nn::Tensor<T> static_features;
};

template <typename T>
SceneBatch<T> make_batch(std::span<const PreparedScene* const> scenes,
                         const ArchitectureConfig& config);

template <typename T>
SceneBatch<T> make_batch(const PreparedScene& scene, const ArchitectureConfig& config) {
  const PreparedScene* one[] = {&scene};
  return make_batch<T>(std::span<const PreparedScene* const>(one), config);
}

}  // namespace deepscene::encoders
