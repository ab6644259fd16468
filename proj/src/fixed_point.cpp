#include "ccftl/fixed_point.hpp"

#include <cmath>

#include "ccftl/error.hpp"

namespace ccftl::fed {

FixedPointVector fp_encode(const nn::ParamVector& v, int scale_bits) {
  require(scale_bits >= 1 && scale_bits < kEncodedBits - 1, ErrorKind::invalid_argument,
          "fp_encode: scale_bits must be in [1, 30]");
  const double scale = std::ldexp(1.0, scale_bits);
  const double limit = std::ldexp(1.0, kEncodedBits - 1);
  FixedPointVector out;
  out.scale_bits = scale_bits;
  out.values.reserve(v.size());
  for (double x : v.values) {
    require(std::isfinite(x), ErrorKind::non_finite, "fp_encode: non-finite value");
    const double r = std::round(x * scale);
    require(r >= -limit && r < limit, ErrorKind::out_of_range,
            "fp_encode: value " + std::to_string(x) + " overflows the fixed-point range");
    out.values.push_back(static_cast<std::int64_t>(r));
  }
  return out;
}

nn::ParamVector fp_decode(const FixedPointVector& f) {
  require(f.scale_bits >= 1, ErrorKind::invalid_argument, "fp_decode: scale_bits must be >= 1");
  nn::ParamVector out(f.values.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    out[i] = std::ldexp(static_cast<double>(f.values[i]), -f.scale_bits);
  }
  return out;
}

}  // namespace ccftl::fed
