#pragma once

// Random scenes, permutations and weight-copy helpers shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/graph/adjacency.hpp"
#include "deepscene/random.hpp"

namespace deepscene::checks {

inline ObjectSet random_set(ObjectType type, std::size_t dim, std::size_t n, Rng& rng,
                            std::int64_t first_id = 0) {
  ObjectSet s;
  s.type = type;
  s.feature_dim = dim;
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : row) x = static_cast<float>(uniform(rng, -1.0, 1.0));
    s.push_back(first_id + static_cast<std::int64_t>(i), row);
  }
  return s;
}

inline std::vector<float> random_static(std::size_t dim, Rng& rng) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(uniform(rng, 0.0, 1.0));
  return v;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Row i of the result is row perm[i] of the input.
inline ObjectSet permute(const ObjectSet& s, const std::vector<std::size_t>& perm) {
  ObjectSet out;
  out.type = s.type;
  out.feature_dim = s.feature_dim;
  for (const auto src : perm) out.push_back(s.ids[src], s.row(src));
  return out;
}

/// Symmetric random weights over n nodes, each pair connected with probability p.
inline graph::WeightedAdjacency random_adjacency(std::size_t n, double p, Rng& rng) {
  std::vector<std::int64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  graph::WeightedAdjacency a(ids);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (bernoulli(rng, p)) a.set_edge(i, j, uniform(rng, 0.01, 2.0));
    }
  }
  return a;
}

/// Node i of the result is node perm[i] of the input.
inline graph::WeightedAdjacency permute(const graph::WeightedAdjacency& a,
                                        const std::vector<std::size_t>& perm) {
  std::vector<std::int64_t> ids;
  for (const auto src : perm) ids.push_back(a.node_ids()[src]);
  graph::WeightedAdjacency out(ids);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = i + 1; j < perm.size(); ++j) {
      const double w = a.at(perm[i], perm[j]);
      if (w != 0.0) out.set_edge(i, j, w);
    }
  }
  return out;
}

/// Copies parameters in declaration order; shapes must agree pairwise.
template <typename T>
void copy_in_order(const std::vector<nn::Tensor<T>>& from, std::vector<nn::Tensor<T>> to) {
  if (from.size() != to.size()) throw std::logic_error("parameter counts differ");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].shape() != to[i].shape()) throw std::logic_error("parameter shapes differ");
    std::copy(from[i].values().begin(), from[i].values().end(), to[i].mutable_values().begin());
  }
}

/// Copies every parameter whose name and shape appear in `from`.
template <typename T>
std::size_t copy_by_name(const encoders::QNetwork<T>& from, const encoders::QNetwork<T>& to) {
  std::size_t copied = 0;
  const auto src = from.named_parameters();
  for (auto& dst : to.named_parameters()) {
    for (const auto& s : src) {
      if (s.name == dst.name && s.tensor.shape() == dst.tensor.shape()) {
        auto d = dst.tensor;
        std::copy(s.tensor.values().begin(), s.tensor.values().end(), d.mutable_values().begin());
        ++copied;
      }
    }
  }
  return copied;
}

/// Overwrites every bias with small random values so no ReLU unit sits
/// exactly on its kink for all inputs.
template <typename T>
void randomize_biases(const encoders::QNetwork<T>& net, Rng& rng) {
  for (auto& p : net.named_parameters()) {
    if (p.name.size() >= 4 && p.name.compare(p.name.size() - 4, 4, "bias") == 0) {
      auto t = p.tensor;
      for (auto& v : t.mutable_values()) v = static_cast<T>(uniform(rng, -0.2, 0.2));
    }
  }
}

template <typename T>
double max_relative_difference(const std::vector<T>& a, const std::vector<T>& b,
                               double floor = 1e-6) {
  if (a.size() != b.size()) return 1e300;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    const double scale = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

}  // namespace deepscene::checks
