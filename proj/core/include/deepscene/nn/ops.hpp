#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deepscene/nn/tensor.hpp"

namespace deepscene::nn {

/// Constant compressed-sparse-row matrix (no gradient), used for graph propagation.
template <typename T>
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_index;
  std::vector<T> values;

  [[nodiscard]] std::size_t nonzeros() const { return values.size(); }
};

enum class Activation : std::uint8_t { linear, relu };

// Every op records its backward closure when grad mode is on and any input
// requires grad. Matrices are rank-2 row-major; vectors are rank-1.

/// x (n×in) · w (in×out) + b (out). `b` may be undefined for no bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation activation);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> square(const Tensor<T>& x);

/// Sum of all entries (64-bit accumulation), shape (1).
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Sums contiguous row groups: rows [offsets[i], offsets[i+1]) of x (n×f) go to
/// output row i. Empty groups give zero rows. Output is ((offsets.size()-1)×f).
template <typename T>
Tensor<T> segment_sum(const Tensor<T>& x, std::span<const std::size_t> offsets);

/// Column-wise max per row group; empty groups give zero rows.
template <typename T>
Tensor<T> segment_max(const Tensor<T>& x, std::span<const std::size_t> offsets);

/// Concatenates matrices with equal row counts along columns.
template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts);

/// Stacks matrices with equal column counts along rows.
template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts);

/// Output row i is x row indices[i].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices);

/// Same storage order, new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// a (constant sparse, r×n) · x (n×f).
template <typename T>
Tensor<T> sparse_matmul(const SparseMatrix<T>& a, const Tensor<T>& x);

/// For x (b×k) returns the vector (b) of x[i, index[i]].
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> index);

/// mean_i (pred[i] - target[i])^2 against a constant target.
template <typename T>
Tensor<T> mse(const Tensor<T>& pred, std::span<const T> target);

}  // namespace deepscene::nn
