#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace mrot {

/// Seedable generator with a documented, platform-independent stream.
///
/// Raw bits come from std::mt19937_64 (whose output sequence is fixed by the
/// C++ standard). Uniforms take the top 53 bits: u = (x >> 11) * 2^-53.
/// Normals use the Box-Muller transform on (1 - u1, u2), returning the
/// cosine branch first and caching the sine branch for the next call.
/// Bounded integers use rejection sampling on the raw 64-bit stream.
/// No std::*_distribution is used, since their algorithms are unspecified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Fisher-Yates, last position first, drawing with uniform_index.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mrot
