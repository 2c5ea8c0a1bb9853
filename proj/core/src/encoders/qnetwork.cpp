#include "deepscene/encoders/qnetwork.hpp"

#include <algorithm>

#include "deepscene/errors.hpp"

namespace deepscene::encoders {

using nn::Activation;
using nn::Tensor;

template <typename T>
QNetwork<T>::QNetwork(ArchitectureConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.validate();
  Rng rng = make_rng(seed, "init");
  const std::size_t f = config_.phi_out();
  const auto& widths = config_.phi_widths;

  if (config_.typed() && config_.shared_last_layer) {
    const std::vector<std::size_t> head(widths.begin(), widths.end() - 1);
    const std::size_t shared_in = head.empty() ? config_.object_dims[0] : head.back();
    auto shared = std::make_shared<nn::DenseLayer<T>>(shared_in, f, Activation::relu, rng);
    for (const auto dim : config_.object_dims) {
      nn::Mlp<T> mlp(dim, head, Activation::relu, Activation::relu, rng);
      mlp.append(shared);
      phi_.push_back(std::move(mlp));
    }
  } else {
    for (const auto dim : config_.object_dims) {
      const std::size_t in = config_.kind == EncoderKind::vbin ? dim + 1 : dim;
      phi_.emplace_back(in, widths, Activation::relu, Activation::relu, rng);
    }
  }

  std::size_t encoded = f;
  for (const auto w : config_.gcn_widths) {
    gcn_.emplace_back(encoded, w, config_.gcn_activation, rng, /*with_bias=*/false);
    encoded = w;
  }
  if (config_.kind == EncoderKind::vbin) encoded = kVbinSlots * f;

  const std::size_t rho_count = config_.kind == EncoderKind::multi_rho ? config_.type_count() : 1;
  std::size_t q_in = config_.static_dim;
  for (std::size_t k = 0; k < rho_count; ++k) {
    rho_.emplace_back(encoded, config_.rho_widths, Activation::relu, Activation::relu, rng);
    q_in += rho_.back().out_dim(encoded);
  }

  auto q_widths = config_.q_widths;
  q_widths.push_back(config_.num_actions);
  q_ = nn::Mlp<T>(q_in, q_widths, Activation::relu, Activation::linear, rng);
}

template <typename T>
Tensor<T> QNetwork<T>::pool(const Tensor<T>& nodes, std::span<const std::size_t> offsets) const {
  return config_.pooling == Pooling::sum ? nn::segment_sum(nodes, offsets)
                                         : nn::segment_max(nodes, offsets);
}

template <typename T>
std::vector<Tensor<T>> QNetwork<T>::encode_objects(const SceneBatch<T>& batch) const {
  if (batch.objects.size() != config_.type_count()) {
    throw DimensionError("batch holds " + std::to_string(batch.objects.size()) +
                         " object types, network expects " + std::to_string(config_.type_count()));
  }
  std::vector<Tensor<T>> out;
  out.reserve(phi_.size());
  for (std::size_t k = 0; k < phi_.size(); ++k) out.push_back(phi_[k].forward(batch.objects[k]));
  return out;
}

template <typename T>
Tensor<T> QNetwork<T>::propagate(const SceneBatch<T>& batch, Tensor<T> h) const {
  for (const auto& layer : gcn_) {
    h = nn::activate(nn::sparse_matmul(batch.propagation, nn::matmul(h, layer.weights())),
                     layer.activation());
  }
  return h;
}

template <typename T>
Tensor<T> QNetwork<T>::encode(const SceneBatch<T>& batch) const {
  switch (config_.kind) {
    case EncoderKind::deepset: {
      const auto encoded = encode_objects(batch);
      return rho_[0].forward(pool(encoded[0], batch.offsets[0]));
    }
    case EncoderKind::deepscene_set: {
      const auto encoded = encode_objects(batch);
      if (config_.pooling == Pooling::sum) {
        Tensor<T> pooled = nn::segment_sum(encoded[0], batch.offsets[0]);
        for (std::size_t k = 1; k < encoded.size(); ++k) {
          pooled = nn::add(pooled, nn::segment_sum(encoded[k], batch.offsets[k]));
        }
        return rho_[0].forward(pooled);
      }
      const auto stacked = nn::gather_rows(nn::concat_rows<T>(encoded), batch.node_rows);
      return rho_[0].forward(nn::segment_max(stacked, batch.node_offsets));
    }
    case EncoderKind::gcn: {
      const auto encoded = encode_objects(batch);
      return rho_[0].forward(pool(propagate(batch, encoded[0]), batch.offsets[0]));
    }
    case EncoderKind::deepscene_graph: {
      const auto encoded = encode_objects(batch);
      const auto h0 = nn::gather_rows(nn::concat_rows<T>(encoded), batch.node_rows);
      return rho_[0].forward(pool(propagate(batch, h0), batch.node_offsets));
    }
    case EncoderKind::vbin: {
      if (!batch.slots.defined()) throw DimensionError("VBIN batch carries no neighbour slots");
      const auto per_slot = phi_[0].forward(batch.slots);
      const auto joined =
          nn::reshape(per_slot, nn::Shape{batch.batch_size, kVbinSlots * config_.phi_out()});
      return rho_[0].forward(joined);
    }
    case EncoderKind::multi_rho: {
      const auto encoded = encode_objects(batch);
      std::vector<Tensor<T>> parts;
      for (std::size_t k = 0; k < encoded.size(); ++k) {
        parts.push_back(rho_[k].forward(pool(encoded[k], batch.offsets[k])));
      }
      return nn::concat_cols<T>(parts);
    }
  }
  throw ConfigError("unhandled encoder kind");
}

template <typename T>
Tensor<T> QNetwork<T>::forward(const SceneBatch<T>& batch) const {
  const Tensor<T> parts[] = {encode(batch), batch.static_features};
  return q_.forward(nn::concat_cols<T>(parts));
}

template <typename T>
std::vector<nn::NamedParameter<T>> QNetwork<T>::named_parameters() const {
  std::vector<nn::NamedParameter<T>> out;
  const bool shared = config_.typed() && config_.shared_last_layer;
  for (std::size_t k = 0; k < phi_.size(); ++k) {
    const auto prefix = "phi." + to_string(config_.object_types[k]);
    const auto& layers = phi_[k].layers();
    const std::size_t own = shared ? layers.size() - 1 : layers.size();
    for (std::size_t i = 0; i < own; ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", layers[i]->weights()});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", layers[i]->bias()});
    }
  }
  if (shared) {
    const auto& last = phi_[0].layers().back();
    out.push_back({"phi.shared.weight", last->weights()});
    out.push_back({"phi.shared.bias", last->bias()});
  }
  for (std::size_t l = 0; l < gcn_.size(); ++l) {
    out.push_back({"gcn." + std::to_string(l) + ".weight", gcn_[l].weights()});
  }
  for (std::size_t k = 0; k < rho_.size(); ++k) {
    rho_[k].collect(rho_.size() == 1 ? "rho" : "rho." + std::to_string(k), out);
  }
  q_.collect("q", out);
  return out;
}

template <typename T>
std::vector<Tensor<T>> QNetwork<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::size_t QNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.tensor.size();
  return n;
}

template <typename T>
void QNetwork<T>::copy_from(const QNetwork& other) {
  if (!(other.config_ == config_)) throw ConfigError("copy_from between different architectures");
  auto dst = parameters();
  const auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy(src[i].values().begin(), src[i].values().end(), dst[i].mutable_values().begin());
  }
}

template <typename T>
QNetwork<T> QNetwork<T>::clone() const {
  QNetwork copy(config_, seed_);
  copy.copy_from(*this);
  return copy;
}

std::size_t greedy_action(std::span<const float> q_values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q_values.size(); ++a) {
    if (q_values[a] > q_values[best]) best = a;
  }
  return best;
}

namespace {

template <typename T>
void require_kind(const QNetwork<T>& net, EncoderKind kind) {
  if (net.config().kind != kind) {
    throw ConfigError("network is " + to_string(net.config().kind) + ", called as " +
                      to_string(kind));
  }
}

template <typename T>
std::vector<T> run_single(const QNetwork<T>& net, const PreparedScene& prepared) {
  const auto batch = make_batch<T>(prepared, net.config());
  const auto q = net.forward(batch);
  return {q.values().begin(), q.values().end()};
}

template <typename T>
SceneState typed_scene(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                       std::span<const float> x_static) {
  SceneState scene;
  for (const auto& s : sets) {
    const auto& types = net.config().object_types;
    if (std::find(types.begin(), types.end(), s.type) == types.end()) {
      throw ConfigError("network has no encoder for object type '" + to_string(s.type) + "'");
    }
    scene.dynamic_sets.push_back(s);
  }
  scene.static_features.assign(x_static.begin(), x_static.end());
  scene.ego_id = -1;
  return scene;
}

}  // namespace

template <typename T>
std::vector<T> deepset_forward(const QNetwork<T>& net, const ObjectSet& vehicles,
                               std::span<const float> x_static) {
  require_kind(net, EncoderKind::deepset);
  const auto scene = typed_scene(net, std::span<const ObjectSet>(&vehicles, 1), x_static);
  return run_single(net, prepare_scene(scene, net.config(), {}));
}

template <typename T>
std::vector<T> deepscene_set_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                     std::span<const float> x_static) {
  require_kind(net, EncoderKind::deepscene_set);
  return run_single(net, prepare_scene(typed_scene(net, sets, x_static), net.config(), {}));
}

template <typename T>
std::vector<T> gcn_forward(const QNetwork<T>& net, const ObjectSet& vehicles,
                           const graph::WeightedAdjacency& adjacency,
                           std::span<const float> x_static) {
  require_kind(net, EncoderKind::gcn);
  const auto scene = typed_scene(net, std::span<const ObjectSet>(&vehicles, 1), x_static);
  return run_single(net, prepare_scene(scene, net.config(), {}, &adjacency));
}

template <typename T>
std::vector<T> deepscene_graph_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                       const graph::WeightedAdjacency& adjacency,
                                       std::span<const float> x_static) {
  require_kind(net, EncoderKind::deepscene_graph);
  return run_single(net,
                    prepare_scene(typed_scene(net, sets, x_static), net.config(), {}, &adjacency));
}

template <typename T>
std::vector<T> vbin_forward(const QNetwork<T>& net, std::span<const float> slots,
                            std::span<const float> x_static) {
  require_kind(net, EncoderKind::vbin);
  const std::size_t width = net.config().object_dims.at(0) + 1;
  if (slots.size() % width != 0 || slots.size() / width != kVbinSlots) {
    throw DimensionError("VBIN needs exactly " + std::to_string(kVbinSlots) + " slots of width " +
                         std::to_string(width) + ", got " + std::to_string(slots.size()) +
                         " values");
  }
  PreparedScene prepared;
  prepared.scene.static_features.assign(x_static.begin(), x_static.end());
  prepared.slots.assign(slots.begin(), slots.end());
  return run_single(net, prepared);
}

template <typename T>
std::vector<T> multi_rho_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                 std::span<const float> x_static) {
  require_kind(net, EncoderKind::multi_rho);
  return run_single(net, prepare_scene(typed_scene(net, sets, x_static), net.config(), {}));
}

template <typename T>
std::vector<T> scene_q_values(const QNetwork<T>& net, const SceneState& scene,
                              const GraphOptions& options) {
  return run_single(net, prepare_scene(scene, net.config(), options));
}

template class QNetwork<float>;
template class QNetwork<double>;

#define DEEPSCENE_INSTANTIATE_FORWARDS(T)                                                        \
  template std::vector<T> deepset_forward<T>(const QNetwork<T>&, const ObjectSet&,              \
                                             std::span<const float>);                          \
  template std::vector<T> deepscene_set_forward<T>(const QNetwork<T>&, std::span<const ObjectSet>, \
                                                   std::span<const float>);                    \
  template std::vector<T> gcn_forward<T>(const QNetwork<T>&, const ObjectSet&,                  \
                                         const graph::WeightedAdjacency&, std::span<const float>); \
  template std::vector<T> deepscene_graph_forward<T>(const QNetwork<T>&,                        \
                                                     std::span<const ObjectSet>,                \
                                                     const graph::WeightedAdjacency&,           \
                                                     std::span<const float>);                   \
  template std::vector<T> vbin_forward<T>(const QNetwork<T>&, std::span<const float>,           \
                                          std::span<const float>);                             \
  template std::vector<T> multi_rho_forward<T>(const QNetwork<T>&, std::span<const ObjectSet>,  \
                                               std::span<const float>);                        \
  template std::vector<T> scene_q_values<T>(const QNetwork<T>&, const SceneState&,              \
                                            const GraphOptions&);

DEEPSCENE_INSTANTIATE_FORWARDS(float)
DEEPSCENE_INSTANTIATE_FORWARDS(double)

#undef DEEPSCENE_INSTANTIATE_FORWARDS

}  // namespace deepscene::encoders
