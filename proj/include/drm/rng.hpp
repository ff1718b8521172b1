#pragma once

#include <cstdint>

namespace drm {

// Counter-based uniform stream: the splitmix64 finalizer applied to
// seed + counter * golden ratio. Output depends only on (seed, draw
// index), so concurrently running replications with distinct child
// seeds cannot perturb each other's streams.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();

  // Uniform strictly inside (0,1).
  double next_uniform();

  // Standard normal via Box-Muller (cosine branch only).
  double next_normal();

  // Gamma(shape, 1) via Marsaglia-Tsang without the squeeze step;
  // shapes below 1 use the boost Gamma(shape+1) * U^{1/shape}.
  double next_gamma(double shape);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Child seed for replication `index` of a run seeded by `master`.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index);

}  // namespace drm
