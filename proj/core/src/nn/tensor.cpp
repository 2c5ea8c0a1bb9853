#include "deepscene/nn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "deepscene/errors.hpp"

namespace deepscene::nn {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace detail {
namespace {
thread_local bool g_grad_mode = true;
}  // namespace

bool grad_mode_enabled() { return g_grad_mode; }

void set_grad_mode(bool enabled) { g_grad_mode = enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::grad_mode_enabled()) { detail::set_grad_mode(false); }
NoGradGuard::~NoGradGuard() { detail::set_grad_mode(previous_); }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " holds " +
                         std::to_string(element_count(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor copy(node_->shape, node_->value, node_->requires_grad);
  if (has_grad()) copy.node_->grad = node_->grad;
  return copy;
}

template <typename T>
void backward(const Tensor<T>& output) {
  if (!output.defined() || !output.has_graph()) {
    throw UsageError("backward() called on a tensor with no recorded graph");
  }
  if (output.size() != 1) {
    throw DimensionError("backward() needs a single-element output, got shape " +
                         shape_string(output.shape()));
  }

  // Iterative post-order DFS; reversed it is a valid topological order.
  using NodePtr = detail::Node<T>*;
  std::vector<NodePtr> order;
  std::unordered_set<NodePtr> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(output.node().get(), 0);
  visited.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodePtr node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), T{0});
  }
  auto* root = output.node().get();
  root->ensure_grad();
  root->grad[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodePtr node = *it;
    if (node->backward) node->backward(*node);
  }
}

template <typename T>
std::vector<std::vector<T>> gradients(const Tensor<T>& output, std::span<Tensor<T>> params) {
  for (auto& p : params) p.zero_grad();
  backward(output);
  std::vector<std::vector<T>> grads;
  grads.reserve(params.size());
  for (auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  return grads;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template std::vector<std::vector<float>> gradients<float>(const Tensor<float>&,
                                                          std::span<Tensor<float>>);
template std::vector<std::vector<double>> gradients<double>(const Tensor<double>&,
                                                            std::span<Tensor<double>>);

}  // namespace deepscene::nn
