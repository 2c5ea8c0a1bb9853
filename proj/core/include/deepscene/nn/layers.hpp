#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "deepscene/nn/ops.hpp"
#include "deepscene/nn/tensor.hpp"
#include "deepscene/random.hpp"

namespace deepscene::nn {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

/// Fully-connected layer: activation(x·W + b), W stored (in_dim × out_dim).
template <typename T>
class DenseLayer {
 public:
  /// Uniform Glorot init in ±sqrt(6 / (in + out)), zero bias.
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng,
             bool with_bias = true);
  DenseLayer(Tensor<T> weights, Tensor<T> bias, Activation activation);

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const;

  [[nodiscard]] std::size_t in_dim() const { return weights_.rows(); }
  [[nodiscard]] std::size_t out_dim() const { return weights_.cols(); }
  [[nodiscard]] Activation activation() const { return activation_; }
  void set_activation(Activation a) { activation_ = a; }

  Tensor<T>& weights() { return weights_; }
  Tensor<T>& bias() { return bias_; }
  [[nodiscard]] const Tensor<T>& weights() const { return weights_; }
  [[nodiscard]] const Tensor<T>& bias() const { return bias_; }
  [[nodiscard]] bool has_bias() const { return bias_.defined(); }

 private:
  Tensor<T> weights_;
  Tensor<T> bias_;
  Activation activation_;
};

/// Stack of dense layers. Layers are held by shared_ptr so that two stacks can
/// reference one physical layer (shared last layer of typed encoders).
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  /// Builds in_dim → widths[0] → ... → widths.back(). An empty width list is the
  /// identity map.
  Mlp(std::size_t in_dim, const std::vector<std::size_t>& widths, Activation hidden,
      Activation last, Rng& rng);

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x) const;

  void append(std::shared_ptr<DenseLayer<T>> layer) { layers_.push_back(std::move(layer)); }
  [[nodiscard]] std::size_t depth() const { return layers_.size(); }
  [[nodiscard]] std::size_t out_dim(std::size_t in_dim) const {
    return layers_.empty() ? in_dim : layers_.back()->out_dim();
  }
  [[nodiscard]] const std::vector<std::shared_ptr<DenseLayer<T>>>& layers() const { return layers_; }
  std::vector<std::shared_ptr<DenseLayer<T>>>& layers() { return layers_; }

  /// Appends "prefix.<i>.weight" / "prefix.<i>.bias" entries.
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  std::vector<std::shared_ptr<DenseLayer<T>>> layers_;
};

/// Keeps the first occurrence of each physical tensor (shared layers appear once).
template <typename T>
std::vector<NamedParameter<T>> unique_parameters(std::vector<NamedParameter<T>> params);

extern template class DenseLayer<float>;
extern template class DenseLayer<double>;
extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace deepscene::nn
