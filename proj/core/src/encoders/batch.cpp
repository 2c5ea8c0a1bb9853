#include "deepscene/encoders/batch.hpp"

#include <cmath>

#include "deepscene/errors.hpp"

namespace deepscene::encoders {

std::vector<graph::GraphVehicle> graph_vehicles(const SceneState& scene, double d_max) {
  std::vector<graph::GraphVehicle> out;
  const auto* vehicles = scene.find(ObjectType::vehicle);
  if (vehicles == nullptr) return out;
  out.reserve(vehicles->size());
  for (std::size_t i = 0; i < vehicles->size(); ++i) {
    const auto row = vehicles->row(i);
    graph::GraphVehicle v;
    v.id = vehicles->ids[i];
    v.position_m = static_cast<double>(row[0]) * d_max;
    v.lane = static_cast<int>(std::lround(row[2]));
    v.is_agent = v.id == scene.ego_id;
    out.push_back(v);
  }
  return out;
}

graph::WeightedAdjacency scene_adjacency(const SceneState& scene, const GraphOptions& options) {
  const auto vehicles = graph_vehicles(scene, options.config.d_max);
  if (options.strategy == graph::Strategy::close_agent) {
    return graph::build_close_agent(vehicles, scene.ego_id, options.config);
  }
  return graph::build_all_close(vehicles, options.config);
}

namespace {

void check_scene(const SceneState& scene, const ArchitectureConfig& config) {
  scene.validate();
  for (std::size_t k = 0; k < config.type_count(); ++k) {
    if (const auto* set = scene.find(config.object_types[k])) {
      if (set->feature_dim != config.object_dims[k]) {
        throw DimensionError(to_string(set->type) + " features have dim " +
                             std::to_string(set->feature_dim) + ", encoder expects " +
                             std::to_string(config.object_dims[k]));
      }
    }
  }
  if (scene.static_features.size() != config.static_dim) {
    throw DimensionError("static features have dim " + std::to_string(scene.static_features.size()) +
                         ", network expects " + std::to_string(config.static_dim));
  }
}

std::vector<float> vbin_slots(const SceneState& scene, std::size_t vehicle_dim,
                              const GraphOptions& options) {
  std::vector<float> slots(kVbinSlots * (vehicle_dim + 1), 0.0F);
  const auto vehicles = graph_vehicles(scene, options.config.d_max);
  std::optional<std::size_t> ego;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].is_agent) ego = i;
  }
  if (!ego) return slots;
  const auto* set = scene.find(ObjectType::vehicle);
  const auto found = graph::surrounding_slots(vehicles, *ego, options.config);
  for (std::size_t s = 0; s < kVbinSlots; ++s) {
    if (!found[s]) continue;
    const auto row = set->row(*found[s]);
    std::copy(row.begin(), row.end(), slots.begin() + static_cast<std::ptrdiff_t>(s * (vehicle_dim + 1)));
    slots[s * (vehicle_dim + 1) + vehicle_dim] = 1.0F;
  }
  return slots;
}

}  // namespace

PreparedScene prepare_scene(SceneState scene, const ArchitectureConfig& config,
                            const GraphOptions& options, const graph::WeightedAdjacency* adjacency) {
  check_scene(scene, config);
  PreparedScene prepared;
  if (config.uses_graph()) {
    std::size_t total = 0;
    std::vector<std::size_t> sizes;
    for (const auto type : config.object_types) {
      const auto* set = scene.find(type);
      sizes.push_back(set ? set->size() : 0);
      total += sizes.back();
    }
    const std::size_t n_vehicles = scene.find(ObjectType::vehicle) ? scene.find(ObjectType::vehicle)->size() : 0;
    graph::WeightedAdjacency built;
    if (adjacency == nullptr && n_vehicles > 0) {
      built = scene_adjacency(scene, options);
      adjacency = &built;
    }
    prepared.graph_nodes = total;
    if (adjacency != nullptr && adjacency->size() == total && total != n_vehicles) {
      // Caller supplied edges over the full stacked node list.
      prepared.propagation = graph::normalize(*adjacency, config.normalization);
      prepared.scene = std::move(scene);
      return prepared;
    }
    if (adjacency != nullptr && adjacency->size() != n_vehicles) {
      throw DimensionError("adjacency covers " + std::to_string(adjacency->size()) +
                           " nodes but the scene has " + std::to_string(n_vehicles) +
                           " vehicles and " + std::to_string(total) + " objects");
    }
    prepared.propagation.assign(total * total, 0.0);
    std::size_t base = 0;
    for (std::size_t k = 0; k < config.type_count(); ++k) {
      if (config.object_types[k] == ObjectType::vehicle && sizes[k] > 0) {
        const auto norm = graph::normalize(*adjacency, config.normalization);
        for (std::size_t i = 0; i < sizes[k]; ++i) {
          for (std::size_t j = 0; j < sizes[k]; ++j) {
            prepared.propagation[(base + i) * total + base + j] = norm[i * sizes[k] + j];
          }
        }
      } else {
        // Nodes without edges keep a unit self-connection (normalizes to 1).
        for (std::size_t i = 0; i < sizes[k]; ++i) {
          prepared.propagation[(base + i) * total + base + i] = 1.0;
        }
      }
      base += sizes[k];
    }
  }
  if (config.kind == EncoderKind::vbin) {
    prepared.slots = vbin_slots(scene, config.object_dims.at(0), options);
  }
  prepared.scene = std::move(scene);
  return prepared;
}

template <typename T>
SceneBatch<T> make_batch(std::span<const PreparedScene* const> scenes,
                         const ArchitectureConfig& config) {
  SceneBatch<T> batch;
  const std::size_t b_count = scenes.size();
  const std::size_t types = config.type_count();
  batch.batch_size = b_count;
  batch.offsets.assign(types, std::vector<std::size_t>{0});

  std::vector<std::vector<T>> features(types);
  for (const auto* prepared : scenes) {
    for (std::size_t k = 0; k < types; ++k) {
      const auto* set = prepared->scene.find(config.object_types[k]);
      std::size_t rows = 0;
      if (set != nullptr) {
        if (set->feature_dim != config.object_dims[k]) {
          throw DimensionError(to_string(set->type) + " features have dim " +
                               std::to_string(set->feature_dim) + ", encoder expects " +
                               std::to_string(config.object_dims[k]));
        }
        features[k].insert(features[k].end(), set->features.begin(), set->features.end());
        rows = set->size();
      }
      batch.offsets[k].push_back(batch.offsets[k].back() + rows);
    }
  }
  std::vector<std::size_t> base(types, 0);
  for (std::size_t k = 0; k < types; ++k) {
    const std::size_t n = batch.offsets[k].back();
    batch.objects.emplace_back(nn::Shape{n, config.object_dims[k]}, std::move(features[k]));
    if (k + 1 < types) base[k + 1] = base[k] + n;
  }

  batch.node_offsets.push_back(0);
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t k = 0; k < types; ++k) {
      for (std::size_t r = batch.offsets[k][b]; r < batch.offsets[k][b + 1]; ++r) {
        batch.node_rows.push_back(base[k] + r);
      }
    }
    batch.node_offsets.push_back(batch.node_rows.size());
  }

  if (config.uses_graph()) {
    auto& a = batch.propagation;
    a.rows = a.cols = batch.node_rows.size();
    a.row_ptr.assign(1, 0);
    for (std::size_t b = 0; b < b_count; ++b) {
      const auto& prepared = *scenes[b];
      const std::size_t n = batch.node_offsets[b + 1] - batch.node_offsets[b];
      if (prepared.graph_nodes != n || prepared.propagation.size() != n * n) {
        throw DimensionError("prepared graph has " + std::to_string(prepared.graph_nodes) +
                             " nodes, scene has " + std::to_string(n));
      }
      const std::size_t offset = batch.node_offsets[b];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double w = prepared.propagation[i * n + j];
          if (w == 0.0) continue;
          a.col_index.push_back(offset + j);
          a.values.push_back(static_cast<T>(w));
        }
        a.row_ptr.push_back(a.values.size());
      }
    }
  }

  if (config.kind == EncoderKind::vbin) {
    const std::size_t width = config.object_dims.at(0) + 1;
    std::vector<T> slots;
    slots.reserve(b_count * kVbinSlots * width);
    for (const auto* prepared : scenes) {
      if (prepared->slots.size() != kVbinSlots * width) {
        throw DimensionError("VBIN expects exactly " + std::to_string(kVbinSlots) +
                             " neighbour slots of width " + std::to_string(width) + ", got " +
                             std::to_string(prepared->slots.size()) + " values");
      }
      slots.insert(slots.end(), prepared->slots.begin(), prepared->slots.end());
    }
    batch.slots = nn::Tensor<T>(nn::Shape{b_count * kVbinSlots, width}, std::move(slots));
  }

  std::vector<T> statics;
  statics.reserve(b_count * config.static_dim);
  for (const auto* prepared : scenes) {
    const auto& s = prepared->scene.static_features;
    if (s.size() != config.static_dim) {
      throw DimensionError("static features have dim " + std::to_string(s.size()) +
                           ", network expects " + std::to_string(config.static_dim));
    }
    statics.insert(statics.end(), s.begin(), s.end());
  }
  batch.static_features = nn::Tensor<T>(nn::Shape{b_count, config.static_dim}, std::move(statics));
  return batch;
}

template SceneBatch<float> make_batch<float>(std::span<const PreparedScene* const>,
                                             const ArchitectureConfig&);
template SceneBatch<double> make_batch<double>(std::span<const PreparedScene* const>,
                                               const ArchitectureConfig&);

}  // namespace deepscene::encoders
