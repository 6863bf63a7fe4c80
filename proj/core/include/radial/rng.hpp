#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "radial/tensor.hpp"

namespace radial {

/// Seeded random source: std::mt19937_64 driven, SplitMix64-seeded.
///
/// The engine's integer sequence is fixed by the C++ standard. Uniforms use
/// the top 53 bits and normals come from Box-Muller rather than
/// std::normal_distribution, so a seed reproduces the same stream for a given
/// build (libm rounding may differ between platforms).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal (Box-Muller; the second variate of each pair is cached).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Child stream keyed by (seed, tag). Independent of how much of this
  /// stream has been consumed.
  Rng split(std::uint64_t tag) const;
  Rng split(std::string_view tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// Tensor of i.i.d. standard normals.
Tensor gaussian(Rng& rng, Shape shape);

}  // namespace radial
