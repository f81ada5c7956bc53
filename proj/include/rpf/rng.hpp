#pragma once

#include "rpf/types.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace rpf {

// Seedable generator whose output is identical on every conforming platform.
//
// The engine is std::mt19937_64, seeded through std::seed_seq, both of which
// the standard fully specifies. Distributions are implemented here rather
// than taken from <random> because the standard distributions are
// implementation-defined. Normals use the Box-Muller transform on 53-bit
// uniforms and return both variates of each pair in order.
class Rng {
 public:
  explicit Rng(Seed seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
  std::size_t below(std::size_t n);

  /// Standard normal variate.
  double normal();

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rpf
