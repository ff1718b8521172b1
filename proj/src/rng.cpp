#include "drm/rng.hpp"

#include <cmath>

#include "drm/errors.hpp"

namespace drm {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RandomStream::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double RandomStream::next_uniform() {
  // 53-bit mantissa placed at bin centers: values lie in (0,1) strictly.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::next_normal() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double RandomStream::next_gamma(double shape) {
  if (!(shape > 0.0)) {
    throw UsageError("rng.next_gamma", "shape must be positive");
  }
  if (shape < 1.0) {
    const double g = next_gamma(shape + 1.0);
    return g * std::pow(next_uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = next_uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return d * v;
    }
  }
}

std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master + kGolden * (index + 1)) + kGolden);
}

}  // namespace drm
