#pragma once

#include <cstdint>
#include <span>

#include "vitsa/fixedpoint.hpp"

namespace vitsa::quant {

// Running mean / sum-of-squared-deviations, real-valued reference.
struct WelfordState {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;
};

WelfordState welford_update(WelfordState state, double x);

// Fixed-point running statistics. `mean` tracks the mean of prescale * x,
// `m2` the sum of squared deviations of prescale * x. Consumers scale back
// with shifts (prescale and its square are powers of two in the shipped
// configurations, but any positive prescale works for the statistics).
struct WelfordFixedState {
  int count = 0;
  std::int64_t mean = 0;
  std::int64_t m2 = 0;
};

// One update step. `recip` must hold round_half_up(2^nu / i) for every i up
// to the channel count (see reciprocal_table). Raises OverflowError when a
// value leaves the configured accumulator width.
WelfordFixedState welford_update_fixed(WelfordFixedState state, std::int64_t x,
                                       const FixedPointParams& fp,
                                       std::span<const std::int64_t> recip);

// Mean absolute error of the fixed-point statistics (mean and standard
// deviation, in input units) against exact two-pass statistics, averaged
// over `rows` seeded integer rows of length `len`. Shared by the parameter
// sweep and the trend checks.
double welford_fixed_error(int nu_exp, int prescale, int rows, int len,
                           std::uint64_t seed);

}  // namespace vitsa::quant
