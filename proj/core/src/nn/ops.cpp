#include "deepscene/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <string>

#include "deepscene/errors.hpp"

namespace deepscene::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMatrix<T>>;

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

// Wraps freshly computed values into a tensor and, when recording, attaches
// the inputs and the backward closure.
template <typename T, typename Backward>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::initializer_list<const Tensor<T>*> inputs, Backward&& backward_fn) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (detail::grad_mode_enabled()) {
    bool any = false;
    for (const auto* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto* in : inputs) node->parents.push_back(in->node());
      node->backward = std::forward<Backward>(backward_fn);
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

template <typename T>
Tensor<T> make_result_list(Shape shape, std::vector<T> values, std::span<const Tensor<T>> inputs,
                           std::function<void(detail::Node<T>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  if (detail::grad_mode_enabled()) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) node->parents.push_back(in.node());
      node->backward = std::move(backward_fn);
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (!x.defined() || x.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got shape " +
                         (x.defined() ? shape_string(x.shape()) : std::string("<undefined>")));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
detail::Node<T>& parent(detail::Node<T>& self, std::size_t i) {
  return *self.parents[i];
}

}  // namespace

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = w.cols();
  if (w.rows() != in) {
    throw DimensionError("linear: input shape " + shape_string(x.shape()) +
                         " does not match weight shape " + shape_string(w.shape()));
  }
  const bool has_bias = b.defined();
  if (has_bias && b.size() != out) {
    throw DimensionError("linear: bias shape " + shape_string(b.shape()) +
                         " does not match weight shape " + shape_string(w.shape()));
  }

  std::vector<T> y(n * out);
  MutMap<T> ym(y.data(), n, out);
  if (n > 0) {
    ym.noalias() = ConstMap<T>(x.values().data(), n, in) * ConstMap<T>(w.values().data(), in, out);
    if (has_bias) {
      const auto bias = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.values().data(), out);
      ym.rowwise() += bias;
    }
  }

  auto backward_fn = [n, in, out, has_bias](detail::Node<T>& self) {
    if (n == 0) return;
    ConstMap<T> gy(self.grad.data(), n, out);
    auto& xn = parent(self, 0);
    auto& wn = parent(self, 1);
    if (xn.requires_grad) {
      xn.ensure_grad();
      MutMap<T>(xn.grad.data(), n, in).noalias() += gy * ConstMap<T>(wn.value.data(), in, out).transpose();
    }
    if (wn.requires_grad) {
      wn.ensure_grad();
      MutMap<T>(wn.grad.data(), in, out).noalias() +=
          ConstMap<T>(xn.value.data(), n, in).transpose() * gy;
    }
    if (has_bias) {
      auto& bn = parent(self, 2);
      if (bn.requires_grad) {
        bn.ensure_grad();
        for (std::size_t c = 0; c < out; ++c) {
          double acc = 0.0;
          for (std::size_t r = 0; r < n; ++r) acc += static_cast<double>(self.grad[r * out + c]);
          bn.grad[c] += static_cast<T>(acc);
        }
      }
    }
  };
  if (has_bias) return make_result<T>(Shape{n, out}, std::move(y), {&x, &w, &b}, backward_fn);
  return make_result<T>(Shape{n, out}, std::move(y), {&x, &w}, backward_fn);
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w) {
  return linear(x, w, Tensor<T>{});
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> y(x.values().begin(), x.values().end());
  for (auto& v : y) v = v > T{0} ? v : T{0};
  return make_result<T>(x.shape(), std::move(y), {&x}, [](detail::Node<T>& self) {
    auto& xn = parent(self, 0);
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xn.value[i] > T{0}) xn.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation activation) {
  return activation == Activation::relu ? relu(x) : x;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return make_result<T>(a.shape(), std::move(y), {&a, &b}, [](detail::Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& in = parent(self, p);
      if (!in.requires_grad) continue;
      in.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  return make_result<T>(a.shape(), std::move(y), {&a, &b}, [](detail::Node<T>& self) {
    auto& an = parent(self, 0);
    auto& bn = parent(self, 1);
    if (an.requires_grad) {
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  return make_result<T>(a.shape(), std::move(y), {&a, &b}, [](detail::Node<T>& self) {
    auto& an = parent(self, 0);
    auto& bn = parent(self, 1);
    if (an.requires_grad) {
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] += self.grad[i] * an.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> y(x.values().begin(), x.values().end());
  for (auto& v : y) v *= factor;
  return make_result<T>(x.shape(), std::move(y), {&x}, [factor](detail::Node<T>& self) {
    auto& xn = parent(self, 0);
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return mul(x, x);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (const auto v : x.values()) acc += static_cast<double>(v);
  return make_result<T>(Shape{1}, std::vector<T>{static_cast<T>(acc)}, {&x},
                        [](detail::Node<T>& self) {
                          auto& xn = parent(self, 0);
                          xn.ensure_grad();
                          for (auto& g : xn.grad) g += self.grad[0];
                        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(x.size())));
}

template <typename T>
Tensor<T> segment_sum(const Tensor<T>& x, std::span<const std::size_t> offsets) {
  require_matrix(x, "segment_sum");
  if (offsets.empty() || offsets.back() != x.rows() || offsets.front() != 0) {
    throw DimensionError("segment_sum: offsets do not cover the " + std::to_string(x.rows()) +
                         " input rows");
  }
  const std::size_t groups = offsets.size() - 1;
  const std::size_t f = x.cols();
  std::vector<T> y(groups * f, T{0});
  std::vector<double> acc(f);
  const auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g) {
    if (offsets[g + 1] < offsets[g]) throw DimensionError("segment_sum: offsets not sorted");
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r) {
      for (std::size_t c = 0; c < f; ++c) acc[c] += static_cast<double>(xv[r * f + c]);
    }
    for (std::size_t c = 0; c < f; ++c) y[g * f + c] = static_cast<T>(acc[c]);
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return make_result<T>(Shape{groups, f}, std::move(y), {&x},
                        [offs = std::move(offs), f](detail::Node<T>& self) {
                          auto& xn = parent(self, 0);
                          xn.ensure_grad();
                          for (std::size_t g = 0; g + 1 < offs.size(); ++g) {
                            for (std::size_t r = offs[g]; r < offs[g + 1]; ++r) {
                              for (std::size_t c = 0; c < f; ++c) {
                                xn.grad[r * f + c] += self.grad[g * f + c];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> segment_max(const Tensor<T>& x, std::span<const std::size_t> offsets) {
  require_matrix(x, "segment_max");
  if (offsets.empty() || offsets.back() != x.rows() || offsets.front() != 0) {
    throw DimensionError("segment_max: offsets do not cover the " + std::to_string(x.rows()) +
                         " input rows");
  }
  const std::size_t groups = offsets.size() - 1;
  const std::size_t f = x.cols();
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<T> y(groups * f, T{0});
  std::vector<std::size_t> argmax(groups * f, kNone);
  const auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r) {
      for (std::size_t c = 0; c < f; ++c) {
        const auto k = g * f + c;
        if (argmax[k] == kNone || xv[r * f + c] > y[k]) {
          y[k] = xv[r * f + c];
          argmax[k] = r;
        }
      }
    }
  }
  return make_result<T>(Shape{groups, f}, std::move(y), {&x},
                        [argmax = std::move(argmax), f](detail::Node<T>& self) {
                          auto& xn = parent(self, 0);
                          xn.ensure_grad();
                          for (std::size_t k = 0; k < argmax.size(); ++k) {
                            if (argmax[k] == kNone) continue;
                            xn.grad[argmax[k] * f + k % f] += self.grad[k];
                          }
                        });
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<T> y(n * total);
  std::size_t col0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * widths[k]), widths[k],
                  y.begin() + static_cast<std::ptrdiff_t>(r * total + col0));
    }
    col0 += widths[k];
  }
  return make_result_list<T>(Shape{n, total}, std::move(y), parts,
                             [widths, total, n](detail::Node<T>& self) {
                               std::size_t c0 = 0;
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 auto& in = parent(self, k);
                                 if (in.requires_grad) {
                                   in.ensure_grad();
                                   for (std::size_t r = 0; r < n; ++r) {
                                     for (std::size_t c = 0; c < widths[k]; ++c) {
                                       in.grad[r * widths[k] + c] += self.grad[r * total + c0 + c];
                                     }
                                   }
                                 }
                                 c0 += widths[k];
                               }
                             });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of zero tensors");
  const std::size_t f = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != f) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    sizes.push_back(p.size());
    rows += p.rows();
  }
  std::vector<T> y;
  y.reserve(rows * f);
  for (const auto& p : parts) y.insert(y.end(), p.values().begin(), p.values().end());
  return make_result_list<T>(Shape{rows, f}, std::move(y), parts, [sizes](detail::Node<T>& self) {
    std::size_t start = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      auto& in = parent(self, k);
      if (in.requires_grad) {
        in.ensure_grad();
        for (std::size_t i = 0; i < sizes[k]; ++i) in.grad[i] += self.grad[start + i];
      }
      start += sizes[k];
    }
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices) {
  require_matrix(x, "gather_rows");
  const std::size_t f = x.cols();
  std::vector<T> y(indices.size() * f);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) +
                           " out of range for shape " + shape_string(x.shape()));
    }
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(indices[i] * f), f,
                y.begin() + static_cast<std::ptrdiff_t>(i * f));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result<T>(Shape{indices.size(), f}, std::move(y), {&x},
                        [idx = std::move(idx), f](detail::Node<T>& self) {
                          auto& xn = parent(self, 0);
                          xn.ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            for (std::size_t c = 0; c < f; ++c) {
                              xn.grad[idx[i] * f + c] += self.grad[i * f + c];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  std::vector<T> y(x.values().begin(), x.values().end());
  return make_result<T>(std::move(shape), std::move(y), {&x}, [](detail::Node<T>& self) {
    auto& xn = parent(self, 0);
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sparse_matmul(const SparseMatrix<T>& a, const Tensor<T>& x) {
  require_matrix(x, "sparse_matmul");
  if (a.cols != x.rows() || a.row_ptr.size() != a.rows + 1) {
    throw DimensionError("sparse_matmul: matrix (" + std::to_string(a.rows) + ", " +
                         std::to_string(a.cols) + ") does not match input " +
                         shape_string(x.shape()));
  }
  const std::size_t f = x.cols();
  std::vector<T> y(a.rows * f, T{0});
  const auto xv = x.values();
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const T w = a.values[k];
      const std::size_t src = a.col_index[k] * f;
      for (std::size_t c = 0; c < f; ++c) y[r * f + c] += w * xv[src + c];
    }
  }
  // The matrix is captured by value; propagation matrices are small.
  return make_result<T>(Shape{a.rows, f}, std::move(y), {&x}, [a, f](detail::Node<T>& self) {
    auto& xn = parent(self, 0);
    xn.ensure_grad();
    for (std::size_t r = 0; r < a.rows; ++r) {
      for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
        const T w = a.values[k];
        const std::size_t dst = a.col_index[k] * f;
        for (std::size_t c = 0; c < f; ++c) xn.grad[dst + c] += w * self.grad[r * f + c];
      }
    }
  });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> index) {
  require_matrix(x, "pick");
  if (index.size() != x.rows()) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for shape " +
                         shape_string(x.shape()));
  }
  const std::size_t k = x.cols();
  std::vector<T> y(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= k) throw DimensionError("pick: column index out of range");
    y[i] = x.values()[i * k + index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result<T>(Shape{index.size()}, std::move(y), {&x},
                        [idx = std::move(idx), k](detail::Node<T>& self) {
                          auto& xn = parent(self, 0);
                          xn.ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            xn.grad[i * k + idx[i]] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& pred, std::span<const T> target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw DimensionError("mse: prediction shape " + shape_string(pred.shape()) + " vs " +
                         std::to_string(target.size()) + " targets");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(pred.values()[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  const double n = static_cast<double>(target.size());
  std::vector<T> tgt(target.begin(), target.end());
  return make_result<T>(Shape{1}, std::vector<T>{static_cast<T>(acc / n)}, {&pred},
                        [tgt = std::move(tgt), n](detail::Node<T>& self) {
                          auto& pn = parent(self, 0);
                          pn.ensure_grad();
                          const double g = static_cast<double>(self.grad[0]) * 2.0 / n;
                          for (std::size_t i = 0; i < tgt.size(); ++i) {
                            pn.grad[i] += static_cast<T>(
                                g * (static_cast<double>(pn.value[i]) - static_cast<double>(tgt[i])));
                          }
                        });
}

#define DEEPSCENE_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> relu<T>(const Tensor<T>&);                                               \
  template Tensor<T> activate<T>(const Tensor<T>&, Activation);                               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                           \
  template Tensor<T> square<T>(const Tensor<T>&);                                             \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                \
  template Tensor<T> mean<T>(const Tensor<T>&);                                               \
  template Tensor<T> segment_sum<T>(const Tensor<T>&, std::span<const std::size_t>);          \
  template Tensor<T> segment_max<T>(const Tensor<T>&, std::span<const std::size_t>);          \
  template Tensor<T> concat_cols<T>(std::span<const Tensor<T>>);                              \
  template Tensor<T> concat_rows<T>(std::span<const Tensor<T>>);                              \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, std::span<const std::size_t>);          \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                     \
  template Tensor<T> sparse_matmul<T>(const SparseMatrix<T>&, const Tensor<T>&);              \
  template Tensor<T> pick<T>(const Tensor<T>&, std::span<const std::size_t>);                 \
  template Tensor<T> mse<T>(const Tensor<T>&, std::span<const T>);

DEEPSCENE_INSTANTIATE_OPS(float)
DEEPSCENE_INSTANTIATE_OPS(double)

#undef DEEPSCENE_INSTANTIATE_OPS

}  // namespace deepscene::nn
