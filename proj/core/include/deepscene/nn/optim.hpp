#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepscene/nn/tensor.hpp"

namespace deepscene::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

/// Bias-corrected Adam update. `grads[i]` must match `params[i]` in size.
/// Moments are allocated lazily on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>> params,
               const std::vector<std::vector<T>>& grads);

/// Same update, reading each parameter's accumulated gradient slot
/// (parameters without a gradient are treated as zero-gradient).
template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>> params);

/// target ← tau·online + (1 − tau)·target, element-wise.
template <typename T>
void soft_update(std::span<Tensor<T>> target, std::span<const Tensor<T>> online, double tau);

}  // namespace deepscene::nn
