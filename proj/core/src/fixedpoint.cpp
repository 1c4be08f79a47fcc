#include "vitsa/fixedpoint.hpp"

#include <cmath>
#include <limits>

namespace vitsa::quant {

namespace {

bool is_pow2(long v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(long v) {
  int p = 0;
  while ((1L << p) < v) ++p;
  return p;
}

}  // namespace

void FixedPointParams::validate() const {
  if (nu_exp < 0) throw ConfigError("nu_exp must be >= 0");
  if (prescale < 1) throw ConfigError("prescale must be >= 1");
  if (!is_pow2(exp_prescale))
    throw ConfigError("exp_prescale must be a power of two");
  if (acc_bits < 8 || acc_bits > 63)
    throw ConfigError("acc_bits out of supported range [8, 63]");
}

QuantCode quantize_linear(double x, double step, int bits, Sign sign) {
  if (!std::isfinite(x)) throw Error("non-finite input");
  if (!(step > 0)) throw Error("non-positive step");
  const double q = std::floor(x / step + 0.5);
  const double lo = min_code(bits, sign);
  const double hi = max_code(bits, sign);
  const double clamped = q < lo ? lo : (q > hi ? hi : q);
  return QuantCode{static_cast<int>(clamped), bits, sign};
}

QuantCode comparator_quantize(std::int64_t x, std::int64_t step) {
  if (step <= 0) throw Error("non-positive step");
  int code = 0;
  for (int i = 0; i < 7; ++i) {
    // threshold (i + 1/2) * step, compared without fractions
    if (2 * x >= (2 * i + 1) * step) ++code;
  }
  return QuantCode{code, 3, Sign::Unsigned};
}

QuantCode scale_quantize(std::int64_t x, std::int64_t scale,
                         std::span<const std::int64_t> table,
                         int table_frac_bits) {
  if (scale <= 0) throw Error("non-positive scale");
  const __int128 lhs = static_cast<__int128>(x) << table_frac_bits;
  int code = 0;
  for (std::int64_t t : table) {
    if (lhs >= static_cast<__int128>(scale) * t) ++code;
  }
  const int bits = 3;
  return QuantCode{code, bits, Sign::Unsigned};
}

QuantCode quantize_fixed(std::int64_t value, std::int64_t step, int bits,
                         Sign sign) {
  if (step <= 0) throw Error("non-positive step");
  const int lo = min_code(bits, sign);
  const int hi = max_code(bits, sign);
  int code = lo;
  const __int128 v2 = static_cast<__int128>(value) * 2;
  for (int k = lo; k < hi; ++k) {
    // decision boundary between k and k+1 sits at (k + 1/2) * step
    if (v2 >= static_cast<__int128>(2 * k + 1) * step) ++code;
  }
  return QuantCode{code, bits, sign};
}

ExpParts exp_decompose(std::int64_t x, const FixedPointParams& fp) {
  constexpr int kFrac = exp_out_frac_bits();
  // log2(e) in Q20
  constexpr std::int64_t kLog2e = 1512775;  // round(1.4426950408889634 * 2^20)
  const int p = log2_exact(fp.exp_prescale);
  const std::int64_t t = (x * kLog2e) >> p;  // x * log2 e in Q20
  ExpParts parts;
  parts.shift = t >> kFrac;  // arithmetic shift: floor
  parts.frac = t & ((std::int64_t{1} << kFrac) - 1);
  return parts;
}

std::int64_t exp_approx(std::int64_t x, const FixedPointParams& fp,
                        ExpStats* stats) {
  constexpr int kFrac = exp_out_frac_bits();
  const ExpParts parts = exp_decompose(x, fp);
  // 1-bit right shift plus overwrite of the vacated top bit: the linear
  // segment covering the fractional power of two.
  const std::int64_t lin =
      (parts.frac >> 1) | (std::int64_t{1} << (kFrac - 1));
  const std::int64_t out_shift = parts.shift + 1;
  if (out_shift >= 40) {
    if (stats) ++stats->saturations;
    return std::numeric_limits<std::int64_t>::max() >> 2;
  }
  if (out_shift >= 0) return lin << out_shift;
  const std::int64_t down = -out_shift;
  if (down >= 63) return 0;
  return lin >> down;
}

std::vector<std::int64_t> reciprocal_table(int nu_exp, int max_i) {
  if (max_i < 1) throw Error("reciprocal table needs max_i >= 1");
  std::vector<std::int64_t> table(static_cast<std::size_t>(max_i) + 1, 0);
  const std::int64_t num = std::int64_t{1} << nu_exp;
  for (int i = 1; i <= max_i; ++i) {
    table[static_cast<std::size_t>(i)] = (2 * num + i) / (2 * i);
  }
  return table;
}

}  // namespace vitsa::quant
