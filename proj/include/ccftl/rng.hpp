#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ccftl {

/// Seeded generator used everywhere randomness is needed.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The standard distributions are implementation-defined, so
/// the conversions to doubles, normals and integer ranges are done here to
/// keep outputs byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller; the second variate is discarded.
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Uniform integer on [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound);
  /// Poisson draw. Knuth's method below 30, normal approximation above.
  std::uint64_t poisson(double mean);
  /// Fisher-Yates shuffle of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a tag.
/// SplitMix64 finalizer over the combined value.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace ccftl
