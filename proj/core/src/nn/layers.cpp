#include "deepscene/nn/layers.hpp"

#include <cmath>
#include <unordered_set>

#include "deepscene/errors.hpp"

namespace deepscene::nn {

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation,
                          Rng& rng, bool with_bias)
    : activation_(activation) {
  if (in_dim == 0 || out_dim == 0) {
    throw ConfigError("dense layer dimensions must be positive, got " + std::to_string(in_dim) +
                      "x" + std::to_string(out_dim));
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::vector<T> w(in_dim * out_dim);
  for (auto& v : w) v = static_cast<T>(uniform(rng, -limit, limit));
  weights_ = Tensor<T>({in_dim, out_dim}, std::move(w), true);
  if (with_bias) bias_ = Tensor<T>::zeros({out_dim}, true);
}

template <typename T>
DenseLayer<T>::DenseLayer(Tensor<T> weights, Tensor<T> bias, Activation activation)
    : weights_(std::move(weights)), bias_(std::move(bias)), activation_(activation) {
  if (weights_.rank() != 2) throw DimensionError("dense layer weights must be a matrix");
  if (bias_.defined() && bias_.size() != weights_.cols()) {
    throw DimensionError("dense layer bias " + shape_string(bias_.shape()) +
                         " does not match weights " + shape_string(weights_.shape()));
  }
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.cols() != in_dim()) {
    throw DimensionError("dense layer expects (batch, " + std::to_string(in_dim()) + "), got " +
                         shape_string(x.shape()));
  }
  return activate(linear(x, weights_, bias_), activation_);
}

template <typename T>
Mlp<T>::Mlp(std::size_t in_dim, const std::vector<std::size_t>& widths, Activation hidden,
            Activation last, Rng& rng) {
  std::size_t d = in_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const auto act = (i + 1 == widths.size()) ? last : hidden;
    layers_.push_back(std::make_shared<DenseLayer<T>>(d, widths[i], act, rng));
    d = widths[i];
  }
}

template <typename T>
Tensor<T> Mlp<T>::forward(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& layer : layers_) h = layer->forward(h);
  return h;
}

template <typename T>
void Mlp<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto base = prefix + "." + std::to_string(i);
    out.push_back({base + ".weight", layers_[i]->weights()});
    if (layers_[i]->has_bias()) out.push_back({base + ".bias", layers_[i]->bias()});
  }
}

template <typename T>
std::vector<NamedParameter<T>> unique_parameters(std::vector<NamedParameter<T>> params) {
  std::unordered_set<const void*> seen;
  std::vector<NamedParameter<T>> out;
  for (auto& p : params) {
    if (seen.insert(p.tensor.identity()).second) out.push_back(std::move(p));
  }
  return out;
}

template class DenseLayer<float>;
template class DenseLayer<double>;
template class Mlp<float>;
template class Mlp<double>;
template std::vector<NamedParameter<float>> unique_parameters(std::vector<NamedParameter<float>>);
template std::vector<NamedParameter<double>> unique_parameters(std::vector<NamedParameter<double>>);

}  // namespace deepscene::nn
