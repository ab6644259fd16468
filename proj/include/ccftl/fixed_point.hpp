#pragma once

#include <cstdint>
#include <vector>

#include "ccftl/nn.hpp"

namespace ccftl::fed {

inline constexpr int kDefaultScaleBits = 16;
/// Encoded integers must lie in [-2^31, 2^31); at 16 fractional bits this
/// admits reals in [-2^15, 2^15).
inline constexpr int kEncodedBits = 32;

struct FixedPointVector {
  std::vector<std::int64_t> values;
  int scale_bits = kDefaultScaleBits;

  bool operator==(const FixedPointVector&) const = default;
};

/// round(x * 2^scale_bits), half away from zero.
FixedPointVector fp_encode(const nn::ParamVector& v, int scale_bits = kDefaultScaleBits);
nn::ParamVector fp_decode(const FixedPointVector& f);

}  // namespace ccftl::fed
