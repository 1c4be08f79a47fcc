#include "vitsa/welford.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace vitsa::quant {

WelfordState welford_update(WelfordState state, double x) {
  state.count += 1;
  const double d0 = x - state.mean;
  state.mean += d0 / static_cast<double>(state.count);
  state.m2 += d0 * (x - state.mean);
  return state;
}

WelfordFixedState welford_update_fixed(WelfordFixedState state, std::int64_t x,
                                       const FixedPointParams& fp,
                                       std::span<const std::int64_t> recip) {
  const int i = state.count + 1;
  if (i >= static_cast<int>(recip.size()))
    throw Error("reciprocal table too small for update index");
  const std::int64_t limit = (std::int64_t{1} << (fp.acc_bits - 1)) - 1;
  const std::int64_t sx = static_cast<std::int64_t>(fp.prescale) * x;
  if (sx > limit || sx < -limit)
    throw OverflowError("statistics overflow (prescaled input)");
  const std::int64_t d0 = sx - state.mean;
  // (2^nu / i) applied as integer multiply, scaled back down by nu bits.
  const __int128 scaled =
      static_cast<__int128>(recip[static_cast<std::size_t>(i)]) * d0;
  state.mean += static_cast<std::int64_t>(scaled >> fp.nu_exp);
  const std::int64_t d1 = sx - state.mean;
  const __int128 m2_next = static_cast<__int128>(state.m2) +
                           static_cast<__int128>(d0) * d1;
  state.count = i;
  if (state.mean > limit || state.mean < -limit || m2_next > limit ||
      m2_next < 0)
    throw OverflowError("statistics overflow");
  state.m2 = static_cast<std::int64_t>(m2_next);
  return state;
}

double welford_fixed_error(int nu_exp, int prescale, int rows, int len,
                           std::uint64_t seed) {
  FixedPointParams fp;
  fp.nu_exp = nu_exp;
  fp.prescale = prescale;
  fp.acc_bits = 48;  // the metric itself must not be limited by saturation
  fp.validate();
  const auto recip = reciprocal_table(nu_exp, len);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 300.0);
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    std::vector<std::int64_t> xs(static_cast<std::size_t>(len));
    for (auto& x : xs)
      x = static_cast<std::int64_t>(std::floor(dist(rng) + 0.5));
    WelfordFixedState st;
    for (std::int64_t x : xs) st = welford_update_fixed(st, x, fp, recip);
    double mean = 0;
    for (std::int64_t x : xs) mean += static_cast<double>(x);
    mean /= len;
    double m2 = 0;
    for (std::int64_t x : xs) {
      const double d = static_cast<double>(x) - mean;
      m2 += d * d;
    }
    const double s = static_cast<double>(prescale);
    const double mean_err = std::abs(static_cast<double>(st.mean) / s - mean);
    const double std_err =
        std::abs(std::sqrt(static_cast<double>(st.m2)) / s - std::sqrt(m2));
    total += mean_err + std_err;
  }
  return total / rows;
}

}  // namespace vitsa::quant
