#include "vitsa/normq.hpp"

#include <cmath>

namespace vitsa::quant {

NormQParams NormQParams::make(double gamma, double beta, double step, int bits,
                              Sign sign, int frac_bits, double var_divisor) {
  if (gamma == 0.0) throw Error("degenerate gamma");
  if (!(step > 0)) throw Error("non-positive step");
  if (!(var_divisor > 0)) throw Error("non-positive var divisor");
  NormQParams p;
  p.gamma_negative = gamma < 0;
  p.frac_bits = frac_bits;
  p.bits = bits;
  p.sign = sign;
  const int lo = min_code(bits, sign);
  const int hi = max_code(bits, sign);
  const double one = static_cast<double>(std::int64_t{1} << frac_bits);
  for (int k = lo; k < hi; ++k) {
    const double s = (k + 0.5) * step;  // decision boundary between k, k+1
    double lin = (s - beta) / gamma;
    if (p.gamma_negative) lin = -lin;
    const double sq = lin * lin / var_divisor;
    p.lin.push_back(static_cast<std::int64_t>(std::floor(lin * one + 0.5)));
    p.sq.push_back(
        static_cast<std::int64_t>(std::floor(sq * one * one + 0.5)));
  }
  p.validate();
  return p;
}

void NormQParams::validate() const {
  if (lin.size() != sq.size()) throw Error("normq threshold size mismatch");
  for (std::size_t j = 1; j < lin.size(); ++j) {
    if (lin[j] <= lin[j - 1])
      throw Error("normq thresholds must be strictly increasing");
  }
  for (std::int64_t v : sq) {
    if (v < 0) throw Error("normq squared threshold negative");
  }
}

QuantCode normq(std::int64_t x, std::int64_t mean, std::int64_t var,
                const NormQParams& params) {
  if (var < 0) throw Error("negative variance");
  std::int64_t d = x - mean;
  if (params.gamma_negative) d = -d;
  const __int128 lhs = static_cast<__int128>(d) * d
                       << (2 * params.frac_bits);
  int count = 0;
  for (std::size_t j = 0; j < params.lin.size(); ++j) {
    const std::int64_t lin = params.lin[j];
    bool pass;
    if (var == 0 && d == 0) {
      // all deviations zero: decided by the threshold sign alone
      pass = lin <= 0;
    } else if (lin <= 0 && d >= 0) {
      pass = true;
    } else if (lin > 0 && d < 0) {
      pass = false;
    } else {
      const __int128 rhs = static_cast<__int128>(params.sq[j]) * var;
      pass = (lin > 0) ? lhs >= rhs : lhs <= rhs;
    }
    if (pass) ++count;
  }
  return QuantCode{min_code(params.bits, params.sign) + count, params.bits,
                   params.sign};
}

}  // namespace vitsa::quant
