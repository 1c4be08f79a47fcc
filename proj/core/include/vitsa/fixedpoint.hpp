#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vitsa/error.hpp"

namespace vitsa::quant {

enum class Sign : std::uint8_t { Signed = 0, Unsigned = 1 };

// Fixed-point configuration for the normalization statistics path and the
// exponential unit.
struct FixedPointParams {
  int nu_exp = 6;         // numerator is 2^nu_exp
  int prescale = 32;      // s, applied to inputs before the running statistics
  int exp_prescale = 1024;  // power of two, input scale of the exponential unit
  int acc_bits = 32;      // accumulator width for MAC sums and statistics

  void validate() const;
};

// A low-bit integer code plus its range metadata.
struct QuantCode {
  int code = 0;
  int bits = 3;
  Sign sign = Sign::Signed;
};

inline int max_code(int bits, Sign sign) {
  return sign == Sign::Unsigned ? (1 << bits) - 1 : (1 << (bits - 1)) - 1;
}
inline int min_code(int bits, Sign sign) {
  return sign == Sign::Unsigned ? 0 : -((1 << (bits - 1)) - 1);
}

// Round-half-up quantizer on a real input. Ties go toward +inf.
QuantCode quantize_linear(double x, double step, int bits, Sign sign);

// Threshold-counting quantizer on fixed-point input: counts thresholds
// (i + 1/2) * step, i = 0..6, that x reaches. Ties pass, which makes the
// result identical to round-half-up division for every input.
QuantCode comparator_quantize(std::int64_t x, std::int64_t step);

// Quantizer with a dynamically scaled threshold table: counts entries j with
// x >= scale * table[j], where table entries carry `table_frac_bits`
// fractional bits. With x = exp(z_i) and scale = sum_j exp(z_j) this yields
// the quantized softmax without any division.
QuantCode scale_quantize(std::int64_t x, std::int64_t scale,
                         std::span<const std::int64_t> table,
                         int table_frac_bits);

// General comparator quantizer on a fixed-point value: `value` and
// `step` share the same scale. Used for the V and SA output quantizers.
QuantCode quantize_fixed(std::int64_t value, std::int64_t step, int bits,
                         Sign sign);

// Shift-based exponential.
//
// Input is an integer scaled by fp.exp_prescale. The result is an integer
// scaled by 2^exp_out_frac_bits(). Implemented as: multiply by log2(e),
// split into shift and fraction, approximate the fractional power of two
// with a 1-bit right shift plus a single-bit overwrite, then apply the
// shift. Monotone non-decreasing; saturates (and counts) on shift overflow.
struct ExpStats {
  long saturations = 0;
};

constexpr int exp_out_frac_bits() { return 20; }

std::int64_t exp_approx(std::int64_t x, const FixedPointParams& fp,
                        ExpStats* stats = nullptr);

// Internal decomposition of the exponential, exposed for the shift-linearity
// property checks.
struct ExpParts {
  std::int64_t shift = 0;  // floor(x * log2 e)
  std::int64_t frac = 0;   // fractional part, exp_out_frac_bits() bits
};
ExpParts exp_decompose(std::int64_t x, const FixedPointParams& fp);

// entry[i] = round_half_up(2^nu_exp / i) for i in [1, max_i]. entry[0] unused.
std::vector<std::int64_t> reciprocal_table(int nu_exp, int max_i);

}  // namespace vitsa::quant
