#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deepscene {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed from a root seed and a stream name.
/// Every random consumer in the project takes its generator from here so that
/// a single 64-bit seed reproduces a whole run.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng{derive_seed(root, stream)};
}

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index) {
  return Rng{derive_seed(root, stream, index)};
}

/// Uniform real in [lo, hi). Spelled out instead of std::uniform_real_distribution
/// so generated streams do not depend on the standard library vendor.
inline double uniform(Rng& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

/// Uniform integer in [lo, hi] (inclusive).
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

inline bool bernoulli(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

}  // namespace deepscene
