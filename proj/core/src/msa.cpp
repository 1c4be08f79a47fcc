#include "vitsa/msa.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vitsa::model {

namespace {

std::int64_t round_i64(double v) {
  return static_cast<std::int64_t>(std::floor(v + 0.5));
}

double population_ln(std::span<const double> row, int c, double gamma,
                     double beta) {
  const int n = static_cast<int>(row.size());
  double mean = 0.0;
  for (double v : row) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : row) var += (v - mean) * (v - mean);
  var /= n;
  const double sigma = std::sqrt(var);
  if (sigma == 0.0) return beta;
  return gamma * (row[static_cast<std::size_t>(c)] - mean) / sigma + beta;
}

}  // namespace

void SaParams::validate() const {
  dims.validate();
  fp.validate();
  if (static_cast<int>(head.size()) != dims.heads)
    throw ConfigError("head parameter bank size mismatch");
  const std::int64_t limit = (std::int64_t{1} << (fp.acc_bits - 1)) - 1;
  const int maxc = quant::max_code(dims.bits, quant::Sign::Signed);
  // MAC accumulators: worst case all codes at the range extreme.
  const std::int64_t mac_worst =
      static_cast<std::int64_t>(maxc) * maxc * dims.embed_dim;
  if (mac_worst > limit)
    throw ConfigError("projection accumulator can overflow acc_bits");
  // Statistics accumulators: the post-MAC clamp bounds |x|, so the
  // worst-case sum of squared deviations is d_h * (2 * s * x_clip)^2.
  if (x_clip <= 0) throw ConfigError("x_clip must be positive");
  const std::int64_t dev = 2 * static_cast<std::int64_t>(fp.prescale) * x_clip;
  if (static_cast<__int128>(dev) * dev * dims.head_dim() > limit)
    throw ConfigError("statistics accumulator can overflow acc_bits");
  if (static_cast<int>(recip.size()) <= dims.head_dim())
    throw ConfigError("reciprocal table shorter than head_dim");
  if (static_cast<int>(softmax_table.size()) !=
      quant::max_code(dims.bits, quant::Sign::Unsigned))
    throw ConfigError("softmax threshold table size mismatch");
  if (e_scale_fix <= 0) throw ConfigError("non-positive exponential scale");
}

std::vector<std::int64_t> project_row(const IntMat& z, const IntMat& u,
                                      int row) {
  if (z.cols != u.rows) throw Error("projection shape mismatch");
  std::vector<std::int64_t> acc(static_cast<std::size_t>(u.cols), 0);
  for (int k = 0; k < z.cols; ++k) {
    const std::int64_t zk = z.at(row, k);
    if (zk == 0) continue;
    for (int c = 0; c < u.cols; ++c) acc[static_cast<std::size_t>(c)] += zk * u.at(k, c);
  }
  return acc;
}

std::vector<std::int64_t> postmac_row(std::span<const std::int64_t> acc,
                                      std::span<const std::int64_t> scale_fix,
                                      std::span<const std::int64_t> bias,
                                      int post_shift, std::int64_t x_clip) {
  std::vector<std::int64_t> x(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c) {
    const __int128 scaled = static_cast<__int128>(acc[c]) * scale_fix[c];
    std::int64_t v = static_cast<std::int64_t>(scaled >> post_shift);
    v += bias.empty() ? 0 : bias[c];
    x[c] = std::clamp(v, -x_clip, x_clip);
  }
  return x;
}

std::vector<int> ln_quant_row(std::span<const std::int64_t> x,
                              std::span<const quant::NormQParams> normq_params,
                              const quant::FixedPointParams& fp,
                              std::span<const std::int64_t> recip) {
  quant::WelfordFixedState st;
  for (std::int64_t v : x) st = quant::welford_update_fixed(st, v, fp, recip);
  std::vector<int> codes(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    const std::int64_t sx = static_cast<std::int64_t>(fp.prescale) * x[c];
    codes[c] = quant::normq(sx, st.mean, st.m2, normq_params[c]).code;
  }
  return codes;
}

SoftmaxRow softmax_row_exp(std::span<const std::int64_t> qk_acc,
                           const SaParams& params, quant::ExpStats* stats) {
  SoftmaxRow row;
  row.exp_values.resize(qk_acc.size());
  constexpr std::int64_t kSumClamp =
      std::numeric_limits<std::int64_t>::max() >> 3;
  for (std::size_t i = 0; i < qk_acc.size(); ++i) {
    const __int128 scaled =
        static_cast<__int128>(qk_acc[i]) * params.e_scale_fix;
    const std::int64_t e_in = static_cast<std::int64_t>(scaled >> params.e_shift);
    row.exp_values[i] = quant::exp_approx(e_in, params.fp, stats);
    // left-to-right systolic accumulation; saturating adder
    if (row.exp_sum > kSumClamp - row.exp_values[i]) {
      row.exp_sum = kSumClamp;
    } else {
      row.exp_sum += row.exp_values[i];
    }
  }
  return row;
}

std::vector<int> softmax_row_quantize(const SoftmaxRow& row,
                                      const SaParams& params) {
  std::vector<int> codes(row.exp_values.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    codes[i] = quant::scale_quantize(row.exp_values[i], row.exp_sum,
                                     params.softmax_table, params.sm_frac)
                   .code;
  }
  return codes;
}

ProjectionResult qkv_project(const QuantTensor& z3b, const SaParams& params,
                             int head) {
  if (head < 0 || head >= params.dims.heads)
    throw Error("head index out of range");
  const HeadParams& hp = params.head[static_cast<std::size_t>(head)];
  if (z3b.codes.rows != params.dims.n_tokens ||
      z3b.codes.cols != params.dims.embed_dim)
    throw Error("activation shape mismatch");
  ProjectionResult r;
  r.q_acc = int_matmul(z3b.codes, hp.u_q.codes);
  r.k_acc = int_matmul(z3b.codes, hp.u_k.codes);
  r.v_acc = int_matmul(z3b.codes, hp.u_v.codes);
  const int dh = params.dims.head_dim();
  r.q_step.resize(static_cast<std::size_t>(dh));
  r.k_step.resize(static_cast<std::size_t>(dh));
  r.v_step.resize(static_cast<std::size_t>(dh));
  for (int c = 0; c < dh; ++c) {
    r.q_step[static_cast<std::size_t>(c)] = params.step_z * hp.u_q.step(c);
    r.k_step[static_cast<std::size_t>(c)] = params.step_z * hp.u_k.step(c);
    r.v_step[static_cast<std::size_t>(c)] = params.step_z * hp.u_v.step(c);
  }
  return r;
}

QuantTensor layernorm_quantize_rows(const IntMat& acc,
                                    std::span<const std::int64_t> scale_fix,
                                    std::span<const std::int64_t> bias,
                                    std::span<const quant::NormQParams> normq_params,
                                    const SaParams& params) {
  if (acc.cols != static_cast<int>(scale_fix.size()))
    throw Error("row length must match channel count");
  QuantTensor out;
  out.codes = IntMat(acc.rows, acc.cols);
  out.bits = params.dims.bits;
  out.sign = quant::Sign::Signed;
  out.step_global = params.step_qk;
  for (int r = 0; r < acc.rows; ++r) {
    std::span<const std::int64_t> acc_row{
        acc.v.data() + static_cast<std::size_t>(r) * acc.cols,
        static_cast<std::size_t>(acc.cols)};
    const auto x = postmac_row(acc_row, scale_fix, bias, params.post_shift,
                               params.x_clip);
    const auto codes = ln_quant_row(x, normq_params, params.fp, params.recip);
    for (int c = 0; c < acc.cols; ++c)
      out.codes.at(r, c) = codes[static_cast<std::size_t>(c)];
  }
  return out;
}

QuantTensor v_quantize_rows(const IntMat& acc,
                            std::span<const std::int64_t> v_scale_fix,
                            const SaParams& params) {
  if (acc.cols != static_cast<int>(v_scale_fix.size()))
    throw Error("row length must match channel count");
  QuantTensor out;
  out.codes = IntMat(acc.rows, acc.cols);
  out.bits = params.dims.bits;
  out.sign = quant::Sign::Signed;
  out.step_global = params.step_v;
  const std::int64_t one = std::int64_t{1} << params.q_frac;
  for (int r = 0; r < acc.rows; ++r) {
    for (int c = 0; c < acc.cols; ++c) {
      // acc * v_scale_fix carries q_frac fractional bits of value/step_v
      out.codes.at(r, c) =
          quant::quantize_fixed(acc.at(r, c) *
                                    v_scale_fix[static_cast<std::size_t>(c)],
                                one, params.dims.bits, quant::Sign::Signed)
              .code;
    }
  }
  return out;
}

QuantTensor attention_from_logits(const IntMat& logits, const SaParams& params,
                                  quant::ExpStats* stats,
                                  std::span<const int> pairing) {
  if (!pairing.empty() && static_cast<int>(pairing.size()) != logits.cols)
    throw Error("pairing length must match column count");
  QuantTensor out;
  out.codes = IntMat(logits.rows, logits.cols);
  out.bits = params.dims.bits;
  out.sign = quant::Sign::Unsigned;
  out.step_global = params.step_a;
  for (int r = 0; r < logits.rows; ++r) {
    std::span<const std::int64_t> row{
        logits.v.data() + static_cast<std::size_t>(r) * logits.cols,
        static_cast<std::size_t>(logits.cols)};
    SoftmaxRow sm = softmax_row_exp(row, params, stats);
    if (!pairing.empty()) {
      std::vector<std::int64_t> remapped(sm.exp_values.size());
      for (std::size_t k = 0; k < remapped.size(); ++k)
        remapped[k] = sm.exp_values[static_cast<std::size_t>(pairing[k])];
      sm.exp_values = std::move(remapped);
    }
    const auto codes = softmax_row_quantize(sm, params);
    for (int c = 0; c < logits.cols; ++c)
      out.codes.at(r, c) = codes[static_cast<std::size_t>(c)];
  }
  return out;
}

QuantTensor attention_scores(const QuantTensor& q3b, const QuantTensor& k3b,
                             const SaParams& params, quant::ExpStats* stats) {
  if (q3b.codes.cols != k3b.codes.cols || q3b.codes.rows != k3b.codes.rows)
    throw Error("attention shape mismatch");
  return attention_from_logits(int_matmul_bt(q3b.codes, k3b.codes), params,
                               stats);
}

QuantTensor av_quantize(const IntMat& acc, const SaParams& params) {
  // scale factor step_a * step_v / step_sa, q_frac fractional bits
  const std::int64_t sa_fix = round_i64(params.step_a * params.step_v /
                                        params.step_sa *
                                        std::pow(2.0, params.q_frac));
  QuantTensor out;
  out.codes = IntMat(acc.rows, acc.cols);
  out.bits = params.dims.bits;
  out.sign = quant::Sign::Signed;
  out.step_global = params.step_sa;
  const std::int64_t one = std::int64_t{1} << params.q_frac;
  for (int r = 0; r < acc.rows; ++r) {
    for (int c = 0; c < acc.cols; ++c) {
      out.codes.at(r, c) =
          quant::quantize_fixed(acc.at(r, c) * sa_fix, one, params.dims.bits,
                                quant::Sign::Signed)
              .code;
    }
  }
  return out;
}

QuantTensor weighted_value(const QuantTensor& a3b, const QuantTensor& v3b,
                           const SaParams& params) {
  if (a3b.codes.cols != v3b.codes.rows) throw Error("AV shape mismatch");
  return av_quantize(int_matmul(a3b.codes, v3b.codes), params);
}

HeadOutputs run_sa_head(const QuantTensor& z3b, const SaParams& params,
                        int head, quant::ExpStats* stats) {
  const HeadParams& hp = params.head[static_cast<std::size_t>(head)];
  const ProjectionResult proj = qkv_project(z3b, params, head);
  HeadOutputs out;
  out.q3b = layernorm_quantize_rows(proj.q_acc, hp.q_scale_fix, hp.q_bias,
                                    hp.q_normq, params);
  out.k3b = layernorm_quantize_rows(proj.k_acc, hp.k_scale_fix, hp.k_bias,
                                    hp.k_normq, params);
  out.v3b = v_quantize_rows(proj.v_acc, hp.v_scale_fix, params);
  out.a3b = attention_scores(out.q3b, out.k3b, params, stats);
  out.sa3b = weighted_value(out.a3b, out.v3b, params);
  return out;
}

RealMat msa_host_side(const std::vector<QuantTensor>& sa_heads,
                      const QuantTensor& u_msa, const RealMat& z_full,
                      double step_sa) {
  if (sa_heads.empty()) throw Error("missing head outputs");
  const int n = sa_heads.front().codes.rows;
  const int dh = sa_heads.front().codes.cols;
  const int d = static_cast<int>(sa_heads.size()) * dh;
  for (const auto& h : sa_heads) {
    if (h.codes.rows != n || h.codes.cols != dh)
      throw Error("missing or malformed head output");
  }
  if (u_msa.codes.rows != d || u_msa.codes.cols != d)
    throw Error("projection weight shape mismatch");
  if (z_full.rows != n || z_full.cols != d)
    throw Error("residual shape mismatch");
  IntMat concat(n, d);
  for (std::size_t h = 0; h < sa_heads.size(); ++h) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < dh; ++c)
        concat.at(r, static_cast<int>(h) * dh + c) =
            sa_heads[h].codes.at(r, c);
  }
  const IntMat acc = int_matmul(concat, u_msa.codes);
  RealMat out(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c)
      out.at(r, c) = static_cast<double>(acc.at(r, c)) * step_sa *
                         u_msa.step(c) +
                     z_full.at(r, c);
  return out;
}

MsaResult run_msa_golden(const QuantTensor& z3b, const SaParams& params,
                         const RealMat& z_full) {
  MsaResult res;
  std::vector<QuantTensor> sa;
  for (int h = 0; h < params.dims.heads; ++h) {
    res.heads.push_back(run_sa_head(z3b, params, h));
    sa.push_back(res.heads.back().sa3b);
  }
  res.msa = msa_host_side(sa, params.u_msa, z_full, params.step_sa);
  return res;
}

RealMat float_reference_msa(const RealMat& z, const SaParams& params) {
  const int n = z.rows;
  const int d = z.cols;
  const int dh = params.dims.head_dim();
  const int heads = params.dims.heads;
  RealMat concat(n, d);
  for (int h = 0; h < heads; ++h) {
    const HeadParams& hp = params.head[static_cast<std::size_t>(h)];
    // real projections
    RealMat q(n, dh), k(n, dh), v(n, dh);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < dh; ++c) {
        double aq = 0, ak = 0, av = 0;
        for (int kk = 0; kk < d; ++kk) {
          const double zv = z.at(r, kk);
          aq += zv * hp.u_q.dequant(kk, c);
          ak += zv * hp.u_k.dequant(kk, c);
          av += zv * hp.u_v.dequant(kk, c);
        }
        // bias lives in the post-MAC fixed-point domain; convert back
        const double gain = static_cast<double>(params.x_gain);
        q.at(r, c) = aq + (hp.q_bias.empty()
                               ? 0.0
                               : static_cast<double>(
                                     hp.q_bias[static_cast<std::size_t>(c)]) /
                                     gain);
        k.at(r, c) = ak + (hp.k_bias.empty()
                               ? 0.0
                               : static_cast<double>(
                                     hp.k_bias[static_cast<std::size_t>(c)]) /
                                     gain);
        v.at(r, c) = av;
      }
    }
    // LN, attention, weighted value in reals
    RealMat qn(n, dh), kn(n, dh);
    for (int r = 0; r < n; ++r) {
      std::span<const double> qrow{q.v.data() + static_cast<std::size_t>(r) * dh,
                                   static_cast<std::size_t>(dh)};
      std::span<const double> krow{k.v.data() + static_cast<std::size_t>(r) * dh,
                                   static_cast<std::size_t>(dh)};
      for (int c = 0; c < dh; ++c) {
        qn.at(r, c) = population_ln(qrow, c, hp.q_gamma[static_cast<std::size_t>(c)],
                                    hp.q_beta[static_cast<std::size_t>(c)]);
        kn.at(r, c) = population_ln(krow, c, hp.k_gamma[static_cast<std::size_t>(c)],
                                    hp.k_beta[static_cast<std::size_t>(c)]);
      }
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int r = 0; r < n; ++r) {
      std::vector<double> logits(static_cast<std::size_t>(n));
      double mx = -1e300;
      for (int m = 0; m < n; ++m) {
        double acc = 0;
        for (int c = 0; c < dh; ++c) acc += qn.at(r, c) * kn.at(m, c);
        logits[static_cast<std::size_t>(m)] = acc * inv_sqrt;
        mx = std::max(mx, logits[static_cast<std::size_t>(m)]);
      }
      double sum = 0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        sum += l;
      }
      for (int c = 0; c < dh; ++c) {
        double acc = 0;
        for (int m = 0; m < n; ++m)
          acc += logits[static_cast<std::size_t>(m)] / sum * v.at(m, c);
        concat.at(r, h * dh + c) = acc;
      }
    }
  }
  // host-side projection + residual, in reals
  RealMat out(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) {
      double acc = 0;
      for (int k = 0; k < d; ++k)
        acc += concat.at(r, k) * params.u_msa.dequant(k, c);
      out.at(r, c) = acc + z.at(r, c);
    }
  }
  return out;
}

namespace {

QuantTensor random_weight(int rows, int cols, int bits, std::mt19937_64& rng) {
  const int maxc = quant::max_code(bits, quant::Sign::Signed);
  std::uniform_int_distribution<int> code(-maxc, maxc);
  std::uniform_real_distribution<double> step(0.015, 0.035);
  QuantTensor t;
  t.codes = IntMat(rows, cols);
  t.bits = bits;
  for (auto& v : t.codes.v) v = code(rng);
  t.step_channels.resize(static_cast<std::size_t>(cols));
  for (auto& s : t.step_channels) s = step(rng);
  return t;
}

}  // namespace

Synthetic make_synthetic(const ModelDims& dims,
                         const quant::FixedPointParams& fp,
                         std::uint64_t seed) {
  dims.validate();
  fp.validate();
  std::mt19937_64 rng(seed);
  const int d = dims.embed_dim;
  const int n = dims.n_tokens;
  const int dh = dims.head_dim();
  const int bits = dims.bits;
  const int maxc = quant::max_code(bits, quant::Sign::Signed);

  Synthetic s;
  SaParams& p = s.params;
  p.dims = dims;
  p.fp = fp;
  p.step_z = 0.02;

  // seeded uniform 3-bit codes; the reference consumes the dequantized values
  std::uniform_int_distribution<int> zdist(-maxc, maxc);
  s.z3b.codes = IntMat(n, d);
  s.z3b.bits = bits;
  s.z3b.step_global = p.step_z;
  s.z_full = RealMat(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) {
      s.z3b.codes.at(r, c) = zdist(rng);
      s.z_full.at(r, c) = s.z3b.dequant(r, c);
    }
  }

  // saturation bound chosen so the worst-case statistics sum provably fits
  const std::int64_t limit = (std::int64_t{1} << (fp.acc_bits - 1)) - 1;
  p.x_clip = static_cast<std::int64_t>(
      std::sqrt(static_cast<double>(limit) / dh) / (2.0 * fp.prescale));

  // power-of-two gain: typical post-MAC magnitude lands near x_clip / 8
  const double sigma_code = std::sqrt(maxc * (maxc + 1) / 3.0);
  const double sigma_acc =
      std::sqrt(static_cast<double>(d)) * sigma_code * sigma_code;
  const double sigma_val = sigma_acc * p.step_z * 0.025;
  const double target = static_cast<double>(p.x_clip) / 4.0;
  const int g = std::max(0, static_cast<int>(std::floor(
                                std::log2(target / sigma_val))));
  p.x_gain = std::int64_t{1} << g;

  p.step_qk = 0.6;
  p.step_a = 1.0 / quant::max_code(bits, quant::Sign::Unsigned);
  p.step_v = sigma_val;
  p.step_sa = p.step_v / 2.0;

  const double post_one = std::pow(2.0, p.post_shift);
  const double q_one = std::pow(2.0, p.q_frac);
  std::uniform_real_distribution<double> gdist(0.8, 1.2);
  std::uniform_real_distribution<double> bdist(-0.2, 0.2);
  std::uniform_int_distribution<std::int64_t> biasd(-p.x_clip / 8,
                                                    p.x_clip / 8);
  for (int h = 0; h < dims.heads; ++h) {
    HeadParams hp;
    hp.u_q = random_weight(d, dh, bits, rng);
    hp.u_k = random_weight(d, dh, bits, rng);
    hp.u_v = random_weight(d, dh, bits, rng);
    for (int c = 0; c < dh; ++c) {
      const std::size_t ci = static_cast<std::size_t>(c);
      hp.q_scale_fix.push_back(round_i64(p.step_z * hp.u_q.step_channels[ci] *
                                         static_cast<double>(p.x_gain) *
                                         post_one));
      hp.k_scale_fix.push_back(round_i64(p.step_z * hp.u_k.step_channels[ci] *
                                         static_cast<double>(p.x_gain) *
                                         post_one));
      hp.q_bias.push_back(biasd(rng));
      hp.k_bias.push_back(biasd(rng));
      // a few mirrored channels exercise the negative-gamma sign logic
      const double qsign = (c % 7 == 3) ? -1.0 : 1.0;
      const double ksign = (c % 11 == 5) ? -1.0 : 1.0;
      hp.q_gamma.push_back(qsign * gdist(rng));
      hp.q_beta.push_back(bdist(rng));
      hp.k_gamma.push_back(ksign * gdist(rng));
      hp.k_beta.push_back(bdist(rng));
      hp.q_normq.push_back(quant::NormQParams::make(
          hp.q_gamma.back(), hp.q_beta.back(), p.step_qk, bits,
          quant::Sign::Signed, p.q_frac, static_cast<double>(dh)));
      hp.k_normq.push_back(quant::NormQParams::make(
          hp.k_gamma.back(), hp.k_beta.back(), p.step_qk, bits,
          quant::Sign::Signed, p.q_frac, static_cast<double>(dh)));
      hp.v_scale_fix.push_back(round_i64(
          p.step_z * hp.u_v.step_channels[ci] / p.step_v * q_one));
    }
    p.head.push_back(std::move(hp));
  }
  p.u_msa = random_weight(d, d, bits, rng);

  p.recip = quant::reciprocal_table(fp.nu_exp, dh);
  const int maxc_u = quant::max_code(bits, quant::Sign::Unsigned);
  const double sm_one = std::pow(2.0, p.sm_frac);
  for (int j = 0; j < maxc_u; ++j)
    p.softmax_table.push_back(round_i64((j + 0.5) * p.step_a * sm_one));
  p.e_scale_fix =
      round_i64(p.step_qk * p.step_qk / std::sqrt(static_cast<double>(dh)) *
                fp.exp_prescale * std::pow(2.0, p.e_shift));

  p.validate();
  return s;
}

ErrorSummary compare(const RealMat& a, const RealMat& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error("shape mismatch");
  ErrorSummary s;
  double total = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double e = std::abs(a.v[i] - b.v[i]);
    s.max_abs = std::max(s.max_abs, e);
    total += e;
  }
  s.mean_abs = a.v.empty() ? 0.0 : total / static_cast<double>(a.v.size());
  return s;
}

}  // namespace vitsa::model
