#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "deepscene/encoders/architecture.hpp"
#include "deepscene/encoders/batch.hpp"
#include "deepscene/nn/layers.hpp"

namespace deepscene::encoders {

/// Q-function with a permutation-invariant scene encoder in front of a dense
/// Q head. One class covers all encoder kinds; `config().kind` selects the
/// forward path.
///
/// Parameter layout:
///   phi.<type>.<i>  per-type encoder layers (phi.shared.* for a shared last layer)
///   gcn.<l>         graph layer weights (no bias)
///   rho[.<k>].<i>   scene encoder (one per type for multi_rho)
///   q.<i>           Q head, last layer linear with num_actions outputs
template <typename T>
class QNetwork {
 public:
  QNetwork(ArchitectureConfig config, std::uint64_t seed);

  QNetwork(const QNetwork&) = delete;
  QNetwork& operator=(const QNetwork&) = delete;
  QNetwork(QNetwork&&) noexcept = default;
  QNetwork& operator=(QNetwork&&) noexcept = default;

  [[nodiscard]] const ArchitectureConfig& config() const { return config_; }

  /// (batch_size × num_actions) Q-values.
  [[nodiscard]] nn::Tensor<T> forward(const SceneBatch<T>& batch) const;

  /// Encoded scene Ψ before concatenation with the static features.
  [[nodiscard]] nn::Tensor<T> encode(const SceneBatch<T>& batch) const;

  [[nodiscard]] std::vector<nn::NamedParameter<T>> named_parameters() const;
  [[nodiscard]] std::vector<nn::Tensor<T>> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Copies parameter values from a network with the same configuration.
  void copy_from(const QNetwork& other);
  [[nodiscard]] QNetwork clone() const;

  nn::Mlp<T>& phi(std::size_t type_index) { return phi_.at(type_index); }
  std::vector<nn::DenseLayer<T>>& gcn_layers() { return gcn_; }
  nn::Mlp<T>& rho(std::size_t index = 0) { return rho_.at(index); }
  nn::Mlp<T>& q_head() { return q_; }

 private:
  [[nodiscard]] nn::Tensor<T> pool(const nn::Tensor<T>& nodes,
                                   std::span<const std::size_t> offsets) const;
  [[nodiscard]] std::vector<nn::Tensor<T>> encode_objects(const SceneBatch<T>& batch) const;
  [[nodiscard]] nn::Tensor<T> propagate(const SceneBatch<T>& batch, nn::Tensor<T> h) const;

  ArchitectureConfig config_;
  std::uint64_t seed_;
  std::vector<nn::Mlp<T>> phi_;
  std::vector<nn::DenseLayer<T>> gcn_;
  std::vector<nn::Mlp<T>> rho_;
  nn::Mlp<T> q_;
};

/// Greedy action: argmax over Q, ties to the lowest index.
std::size_t greedy_action(std::span<const float> q_values);

// Single-scene entry points, one per encoder kind. Each checks the network
// kind, prepares the scene and returns the num_actions Q-values.

template <typename T>
std::vector<T> deepset_forward(const QNetwork<T>& net, const ObjectSet& vehicles,
                               std::span<const float> x_static);

template <typename T>
std::vector<T> deepscene_set_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                     std::span<const float> x_static);

template <typename T>
std::vector<T> gcn_forward(const QNetwork<T>& net, const ObjectSet& vehicles,
                           const graph::WeightedAdjacency& adjacency, std::span<const float> x_static);

template <typename T>
std::vector<T> deepscene_graph_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                       const graph::WeightedAdjacency& adjacency,
                                       std::span<const float> x_static);

/// `slots` holds one row per neighbour slot of (vehicle features, presence bit);
/// exactly kVbinSlots rows are required.
template <typename T>
std::vector<T> vbin_forward(const QNetwork<T>& net, std::span<const float> slots,
                            std::span<const float> x_static);

template <typename T>
std::vector<T> multi_rho_forward(const QNetwork<T>& net, std::span<const ObjectSet> sets,
                                 std::span<const float> x_static);

/// Q-values for a whole scene using the network's own preparation path.
template <typename T>
std::vector<T> scene_q_values(const QNetwork<T>& net, const SceneState& scene,
                              const GraphOptions& options);

extern template class QNetwork<float>;
extern template class QNetwork<double>;

}  // namespace deepscene::encoders
