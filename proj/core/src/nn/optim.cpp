#include "deepscene/nn/optim.hpp"

#include <cmath>
#include <string>

#include "deepscene/errors.hpp"

namespace deepscene::nn {
namespace {

template <typename T>
void ensure_moments(AdamState<T>& state, std::span<Tensor<T>> params) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), T{0});
      state.second_moment.emplace_back(p.size(), T{0});
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].size()) {
      throw DimensionError("adam: moment size mismatch for parameter " + std::to_string(i) +
                           " of shape " + shape_string(params[i].shape()));
    }
  }
}

template <typename T>
void apply(AdamState<T>& state, std::span<Tensor<T>> params,
           const std::function<std::span<const T>(std::size_t)>& grad_of) {
  ensure_moments(state, params);
  const auto& cfg = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    const auto g = grad_of(i);
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double gk = g.empty() ? 0.0 : static_cast<double>(g[k]);
      const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + cfg.epsilon);
      values[k] = static_cast<T>(static_cast<double>(values[k]) - update);
    }
  }
}

}  // namespace

template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>> params,
               const std::vector<std::vector<T>>& grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size()) {
      throw DimensionError("adam: gradient of size " + std::to_string(grads[i].size()) +
                           " for parameter of shape " + shape_string(params[i].shape()));
    }
  }
  apply<T>(state, params, [&](std::size_t i) { return std::span<const T>(grads[i]); });
}

template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>> params) {
  apply<T>(state, params, [&](std::size_t i) { return params[i].grad(); });
}

template <typename T>
void soft_update(std::span<Tensor<T>> target, std::span<const Tensor<T>> online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ConfigError("soft update step tau must lie in [0, 1], got " + std::to_string(tau));
  }
  if (target.size() != online.size()) {
    throw DimensionError("soft update: " + std::to_string(target.size()) + " target vs " +
                         std::to_string(online.size()) + " online parameters");
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].shape() != online[i].shape()) {
      throw DimensionError("soft update: shape " + shape_string(target[i].shape()) + " vs " +
                           shape_string(online[i].shape()));
    }
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto dst = target[i].mutable_values();
    const auto src = online[i].values();
    if (tau == 1.0) {
      std::copy(src.begin(), src.end(), dst.begin());
      continue;
    }
    if (tau == 0.0) continue;
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = static_cast<T>(tau * static_cast<double>(src[k]) +
                              (1.0 - tau) * static_cast<double>(dst[k]));
    }
  }
}

template void adam_step<float>(AdamState<float>&, std::span<Tensor<float>>,
                               const std::vector<std::vector<float>>&);
template void adam_step<double>(AdamState<double>&, std::span<Tensor<double>>,
                                const std::vector<std::vector<double>>&);
template void adam_step<float>(AdamState<float>&, std::span<Tensor<float>>);
template void adam_step<double>(AdamState<double>&, std::span<Tensor<double>>);
template void soft_update<float>(std::span<Tensor<float>>, std::span<const Tensor<float>>, double);
template void soft_update<double>(std::span<Tensor<double>>, std::span<const Tensor<double>>,
                                  double);

}  // namespace deepscene::nn
