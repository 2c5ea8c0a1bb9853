#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace deepscene::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the recorded computation. Op nodes keep their inputs alive
// through `parents`; leaves (parameters, constants) have no parents.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T{0});
  }
  [[nodiscard]] bool is_leaf() const { return parents.empty(); }
};

bool grad_mode_enabled();
void set_grad_mode(bool enabled);

}  // namespace detail

/// Disables graph recording on this thread while alive. Forward passes under
/// the guard produce plain values (used for target networks and evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major array with an optional gradient slot.
///
/// A Tensor is a cheap handle: copies alias the same storage. Use clone() for
/// an independent copy. Tensors created by ops record how to propagate
/// gradients back to their inputs while grad mode is enabled.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
  [[nodiscard]] std::size_t size() const { return node_->value.size(); }
  [[nodiscard]] std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
  [[nodiscard]] std::size_t cols() const {
    return node_->shape.size() < 2 ? 1 : node_->shape[1];
  }

  [[nodiscard]] std::span<const T> values() const { return node_->value; }
  [[nodiscard]] std::span<T> mutable_values() { return node_->value; }
  [[nodiscard]] T item() const;
  [[nodiscard]] T at(std::size_t i) const { return node_->value.at(i); }
  [[nodiscard]] T at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient accumulated by the last backward passes; empty span when none.
  [[nodiscard]] std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), T{0}); }

  /// True when this tensor was produced by a recorded op.
  [[nodiscard]] bool has_graph() const { return node_ && !node_->is_leaf(); }

  [[nodiscard]] Tensor detach() const;
  [[nodiscard]] Tensor clone() const;

  [[nodiscard]] const void* identity() const { return node_.get(); }
  [[nodiscard]] const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

/// Runs reverse-mode accumulation from a single-element output. Gradients are
/// added to every reachable tensor that requires grad.
template <typename T>
void backward(const Tensor<T>& output);

/// Zeroes the parameter grads, back-propagates from `output` and returns one
/// gradient per parameter (zeros for parameters the output does not reach).
template <typename T>
std::vector<std::vector<T>> gradients(const Tensor<T>& output, std::span<Tensor<T>> params);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace deepscene::nn
