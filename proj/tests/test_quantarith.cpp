#include <cmath>
#include <random>

#include "doctest.h"
#include "vitsa/fixedpoint.hpp"
#include "vitsa/normq.hpp"
#include "vitsa/welford.hpp"

using namespace vitsa::quant;

namespace {

// exact integer round-half-up of x / step
std::int64_t round_half_up_div(std::int64_t x, std::int64_t step) {
  const std::int64_t num = 2 * x + step;
  const std::int64_t den = 2 * step;
  std::int64_t q = num / den;
  if (num % den != 0 && num < 0) --q;
  return q;
}

}  // namespace

TEST_CASE("fixed point params validation") {
  FixedPointParams fp;
  CHECK_NOTHROW(fp.validate());
  fp.exp_prescale = 1000;  // not a power of two
  CHECK_THROWS_AS(fp.validate(), vitsa::ConfigError);
  fp = FixedPointParams{};
  fp.acc_bits = 64;
  CHECK_THROWS_AS(fp.validate(), vitsa::ConfigError);
}

TEST_CASE("quantize_linear rounds half toward +inf and clamps") {
  CHECK(quantize_linear(0.0, 0.5, 3, Sign::Signed).code == 0);
  CHECK(quantize_linear(1.24, 0.5, 3, Sign::Signed).code == 2);
  CHECK(quantize_linear(1.25, 0.5, 3, Sign::Signed).code == 3);  // tie up
  CHECK(quantize_linear(-1.25, 0.5, 3, Sign::Signed).code == -2);  // tie up
  CHECK(quantize_linear(99.0, 0.5, 3, Sign::Signed).code == 3);
  CHECK(quantize_linear(-99.0, 0.5, 3, Sign::Signed).code == -3);
  CHECK(quantize_linear(99.0, 0.5, 3, Sign::Unsigned).code == 7);
  CHECK(quantize_linear(-1.0, 0.5, 3, Sign::Unsigned).code == 0);
  CHECK_THROWS_AS(quantize_linear(std::nan(""), 0.5, 3, Sign::Signed),
                  vitsa::Error);
  CHECK_THROWS_AS(quantize_linear(1.0, 0.0, 3, Sign::Signed), vitsa::Error);
}

TEST_CASE("comparator quantizer equals round-half-up division exhaustively") {
  const std::int64_t step = 997;
  long mismatches = 0;
  for (std::int64_t x = -60 * step; x <= 60 * step; ++x) {
    const int got = comparator_quantize(x, step).code;
    std::int64_t want = round_half_up_div(x, step);
    want = std::max<std::int64_t>(0, std::min<std::int64_t>(7, want));
    if (got != want) ++mismatches;
  }
  CHECK(mismatches == 0);
  // a tie input sits exactly on a threshold and passes it
  CHECK(comparator_quantize(5 * step, 2 * step).code == 3);
}

TEST_CASE("scale quantizer: softmax singleton and symmetric pair") {
  std::vector<std::int64_t> table;
  for (int j = 0; j < 7; ++j)
    table.push_back(static_cast<std::int64_t>(
        std::floor((j + 0.5) / 7.0 * 4096.0 + 0.5)));
  // one element: ratio 1.0 -> full code
  CHECK(scale_quantize(1 << 20, 1 << 20, table, 12).code == 7);
  // two equal logits: ratio 0.5 -> quantize(0.5) = 4 (tie passes)
  CHECK(scale_quantize(1 << 20, 2 << 20, table, 12).code ==
        quantize_linear(0.5, 1.0 / 7, 3, Sign::Unsigned).code);
  CHECK_THROWS_AS(scale_quantize(1, 0, table, 12), vitsa::Error);
}

TEST_CASE("quantize_fixed matches quantize_linear on a signed grid") {
  const std::int64_t step = 4096;
  for (std::int64_t v = -5 * step; v <= 5 * step; v += 7) {
    const int got = quantize_fixed(v, step, 3, Sign::Signed).code;
    const int want =
        quantize_linear(static_cast<double>(v) / 4096.0, 1.0, 3, Sign::Signed)
            .code;
    CHECK(got == want);
  }
}

TEST_CASE("exp_approx is monotone and exact on powers of two") {
  FixedPointParams fp;
  std::int64_t prev = -1;
  for (std::int64_t x = -8 * fp.exp_prescale; x <= 0; ++x) {
    const std::int64_t y = exp_approx(x, fp);
    CHECK(y >= prev);
    prev = y;
  }
  CHECK(exp_approx(0, fp) == (std::int64_t{1} << exp_out_frac_bits()));
}

TEST_CASE("exp_approx max relative error stays under the frozen bound") {
  FixedPointParams fp;
  double worst = 0.0;
  for (std::int64_t xi = -8 * fp.exp_prescale; xi <= 0; ++xi) {
    const double x = static_cast<double>(xi) / fp.exp_prescale;
    const double approx = static_cast<double>(exp_approx(xi, fp)) /
                          std::pow(2.0, exp_out_frac_bits());
    const double truth = std::exp(x);
    worst = std::max(worst, std::abs(approx - truth) / truth);
  }
  CHECK(worst <= 0.0615);  // frozen regression bound (measured 0.061475)
  CHECK(worst >= 0.05);    // the approximation is not accidentally exact
}

TEST_CASE("exp_approx saturates and counts overflow") {
  FixedPointParams fp;
  ExpStats stats;
  const std::int64_t big = exp_approx(64 * fp.exp_prescale, fp, &stats);
  CHECK(stats.saturations == 1);
  CHECK(big > (std::int64_t{1} << 58));
  CHECK(exp_approx(-100 * fp.exp_prescale, fp) == 0);
}

TEST_CASE("exp_decompose splits shift and fraction") {
  FixedPointParams fp;
  const auto p0 = exp_decompose(0, fp);
  CHECK(p0.shift == 0);
  CHECK(p0.frac == 0);
  const auto pn = exp_decompose(-fp.exp_prescale, fp);  // x = -1
  CHECK(pn.shift == -2);  // floor(-log2 e)
  CHECK(pn.frac >= 0);
  CHECK(pn.frac < (std::int64_t{1} << exp_out_frac_bits()));
}

TEST_CASE("reciprocal table entries") {
  const auto t = reciprocal_table(6, 64);
  CHECK(t.size() == 65);
  CHECK(t[1] == 64);
  CHECK(t[2] == 32);
  CHECK(t[3] == 21);  // round(64/3)
  CHECK(t[64] == 1);
  CHECK_THROWS_AS(reciprocal_table(6, 0), vitsa::Error);
}

TEST_CASE("real Welford equals two-pass statistics on 1e4 sequences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(1.5, 3.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const int len = 4 + static_cast<int>(rng() % 61);
    std::vector<double> xs(static_cast<std::size_t>(len));
    for (auto& x : xs) x = dist(rng);
    WelfordState st;
    for (double x : xs) st = welford_update(st, x);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= len;
    double m2 = 0;
    for (double x : xs) m2 += (x - mean) * (x - mean);
    CHECK(std::abs(st.mean - mean) <=
          1e-9 * std::max(1.0, std::abs(mean)));
    CHECK(std::abs(st.m2 - m2) <= 1e-9 * std::max(1.0, m2));
  }
}

TEST_CASE("fixed-point Welford basics and overflow") {
  FixedPointParams fp;
  const auto recip = reciprocal_table(fp.nu_exp, 64);
  WelfordFixedState st;
  for (int i = 0; i < 8; ++i) st = welford_update_fixed(st, 5, fp, recip);
  CHECK(st.count == 8);
  CHECK(st.mean == 5 * fp.prescale);  // constant sequence is exact
  CHECK(st.m2 == 0);
  WelfordFixedState big;
  CHECK_THROWS_AS(
      welford_update_fixed(big, std::int64_t{1} << 40, fp, recip),
      vitsa::OverflowError);
}

TEST_CASE("fixed-point statistics error trend in nu and prescale") {
  // frozen trend grid; 0.1% slack absorbs floor interactions between the
  // two quantization sources
  const int nus[] = {2, 3, 4, 5, 6, 7, 8, 9};
  const int scales[] = {2, 4, 8, 16, 32, 64};
  for (int s : scales) {
    double prev = 1e300;
    for (int nu : nus) {
      const double e = welford_fixed_error(nu, s, 200, 64, 1);
      CHECK(e <= prev * 1.001);
      prev = e;
    }
  }
  for (int nu : nus) {
    double prev = 1e300;
    for (int s : scales) {
      const double e = welford_fixed_error(nu, s, 200, 64, 1);
      CHECK(e <= prev * 1.001);
      prev = e;
    }
  }
}

TEST_CASE("normq equals real layer-norm-then-quantize on sign quadrants") {
  // dyadic parameters make the oracle exact in fixed point
  const double step = 0.5;
  for (double gamma : {2.0, 0.5, -1.0, -0.5}) {
    for (double beta : {0.25, -0.375, 0.0}) {
      const auto p =
          NormQParams::make(gamma, beta, step, 3, Sign::Signed, 12, 1.0);
      for (std::int64_t sigma : {5, 7, 10, 13}) {
        for (std::int64_t d = -45; d <= 45; ++d) {
          const std::int64_t mean = -23;
          const int got = normq(mean + d, mean, sigma * sigma, p).code;
          const double value =
              gamma * static_cast<double>(d) / static_cast<double>(sigma) +
              beta;
          const int want =
              quantize_linear(value, step, 3, Sign::Signed).code;
          CHECK(got == want);
        }
      }
    }
  }
}

TEST_CASE("normq zero-variance row quantizes beta") {
  for (double beta : {0.6, -0.6, 0.0}) {
    const auto p = NormQParams::make(1.0, beta, 0.5, 3, Sign::Signed, 12, 1.0);
    const int got = normq(100, 100, 0, p).code;
    CHECK(got == quantize_linear(beta, 0.5, 3, Sign::Signed).code);
  }
}

TEST_CASE("normq parameter validation") {
  CHECK_THROWS_AS(NormQParams::make(0.0, 0.1, 0.5, 3, Sign::Signed, 12, 1.0),
                  vitsa::Error);
  CHECK_THROWS_AS(NormQParams::make(1.0, 0.1, -0.5, 3, Sign::Signed, 12, 1.0),
                  vitsa::Error);
  auto p = NormQParams::make(1.0, 0.0, 0.5, 3, Sign::Signed, 12, 1.0);
  p.lin[2] = p.lin[1];  // break monotonicity
  CHECK_THROWS_AS(p.validate(), vitsa::Error);
  CHECK_THROWS_AS(normq(0, 0, -1, p), vitsa::Error);
}
