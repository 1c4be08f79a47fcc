#pragma once

#include <cstdint>
#include <vector>

#include "vitsa/fixedpoint.hpp"

namespace vitsa::quant {

// Precomputed thresholds for the division-free, square-root-free
// layer-norm quantizer. For each quantizer decision boundary s_j the pair
//   lin[j] = (s_j - beta) / gamma        (Q frac_bits)
//   sq[j]  = lin[j]^2 / var_divisor      (Q 2*frac_bits)
// is stored. A negative gamma mirrors the comparison; the stored `lin`
// values are already negated in that case so they stay strictly increasing.
struct NormQParams {
  std::vector<std::int64_t> lin;  // strictly increasing
  std::vector<std::int64_t> sq;   // sq[j] == lin[j]^2 / var_divisor, rounded
  bool gamma_negative = false;
  int frac_bits = 12;
  int bits = 3;
  Sign sign = Sign::Signed;

  // Precompute from real-valued normalization parameters. `var_divisor`
  // folds a constant divisor of the variance proxy (e.g. the channel count
  // when the caller passes a sum of squared deviations) into the squared
  // thresholds, keeping the comparison division-free.
  static NormQParams make(double gamma, double beta, double step, int bits,
                          Sign sign, int frac_bits, double var_divisor = 1.0);

  void validate() const;
};

// Quantize gamma * (x - mean) / sigma + beta without division or square
// root. `var` is the variance proxy matching the params' var_divisor; x and
// mean share one fixed-point scale and var carries that scale squared.
//
// Stage 1 compares (x - mean)^2 against sq[j] * var and extracts the signs;
// stage 2 combines:
//   lin[j] <= 0 and d >= 0             -> pass
//   lin[j]  > 0 and d <  0             -> fail
//   both non-negative                  -> pass iff d^2 >= sq[j] * var
//   both negative                      -> pass iff d^2 <= sq[j] * var
// where d is the (sign-adjusted) deviation x - mean.
QuantCode normq(std::int64_t x, std::int64_t mean, std::int64_t var,
                const NormQParams& params);

}  // namespace vitsa::quant
