#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vitsa/fixedpoint.hpp"
#include "vitsa/normq.hpp"
#include "vitsa/tensor.hpp"
#include "vitsa/welford.hpp"

namespace vitsa::model {

// Per-head parameter bank. The post-MAC scale factors absorb the step-size
// product of the preceding integer matmul; they are plain integers with
// `post_shift` fractional bits so the whole head runs in integer arithmetic.
struct HeadParams {
  QuantTensor u_q, u_k, u_v;  // d x d_h weights, per-output-channel steps

  // LN input path (Q and K): x_c = clamp((acc * scale) >> post_shift + bias)
  std::vector<std::int64_t> q_scale_fix, k_scale_fix;
  std::vector<std::int64_t> q_bias, k_bias;
  std::vector<double> q_gamma, q_beta, k_gamma, k_beta;
  std::vector<quant::NormQParams> q_normq, k_normq;  // one per channel

  // V path: code = quantize(acc * v_scale_fix / 2^q_frac)
  std::vector<std::int64_t> v_scale_fix;
};

// Full parameter set of the offloaded MSA plus the host-side projection.
struct SaParams {
  ModelDims dims;
  quant::FixedPointParams fp;

  int post_shift = 16;  // frac bits of post-MAC scale factors
  int q_frac = 12;      // frac bits of quantizer scale factors
  int sm_frac = 12;     // frac bits of the softmax threshold table
  std::int64_t x_clip = 0;  // post-MAC saturation bound (overflow guard)

  double step_z = 0.0;   // global activation step of z
  double step_qk = 0.0;  // step of the normalized Q~/K~ codes
  double step_a = 0.0;   // softmax output step
  double step_v = 0.0;
  double step_sa = 0.0;  // global SA output step

  std::vector<HeadParams> head;
  QuantTensor u_msa;  // d x d host-side projection weights

  std::vector<std::int64_t> recip;          // reciprocal table, up to head_dim
  std::vector<std::int64_t> softmax_table;  // (2^bits - 1) entries, sm_frac

  // pre-exponential scale: e_in = (qk_acc * e_scale_fix) >> e_shift,
  // folding step_qk^2 / sqrt(head_dim) and the exponential prescale
  std::int64_t e_scale_fix = 0;
  int e_shift = 12;

  // power-of-two gain mapping real pre-LN values into the integer LN domain
  // (LN itself is scale invariant; the gain only sets the bias granularity)
  std::int64_t x_gain = 1;

  // Rejects configurations whose worst-case intermediates would leave the
  // configured accumulator width.
  void validate() const;
};

struct HeadOutputs {
  QuantTensor q3b, k3b, v3b, a3b, sa3b;
};

// ---- row-level kernels (shared verbatim by the cycle simulator) ----

// One output row of the integer projection acc[c] = sum_k z[row][k] * u[k][c].
std::vector<std::int64_t> project_row(const IntMat& z, const IntMat& u,
                                      int row);

// Post-MAC scale + bias with saturation into the LN domain.
std::vector<std::int64_t> postmac_row(std::span<const std::int64_t> acc,
                                      std::span<const std::int64_t> scale_fix,
                                      std::span<const std::int64_t> bias,
                                      int post_shift, std::int64_t x_clip);

// Fixed-point Welford over one row, then the division-free NormQ per element.
std::vector<int> ln_quant_row(std::span<const std::int64_t> x,
                              std::span<const quant::NormQParams> normq_params,
                              const quant::FixedPointParams& fp,
                              std::span<const std::int64_t> recip);

// Exponentials plus the left-to-right systolic row sum.
struct SoftmaxRow {
  std::vector<std::int64_t> exp_values;
  std::int64_t exp_sum = 0;
};
SoftmaxRow softmax_row_exp(std::span<const std::int64_t> qk_acc,
                           const SaParams& params, quant::ExpStats* stats);

// Division-free softmax quantization of one row against its own sum.
std::vector<int> softmax_row_quantize(const SoftmaxRow& row,
                                      const SaParams& params);

// ---- matrix-level operations ----

struct ProjectionResult {
  IntMat q_acc, k_acc, v_acc;                      // N x d_h integer sums
  std::vector<double> q_step, k_step, v_step;      // step_z * step_u per column
};

// Integer QKV projection; dequantization metadata is carried alongside and
// never applied inside the integer path.
ProjectionResult qkv_project(const QuantTensor& z3b, const SaParams& params,
                             int head);

QuantTensor layernorm_quantize_rows(const IntMat& acc,
                                    std::span<const std::int64_t> scale_fix,
                                    std::span<const std::int64_t> bias,
                                    std::span<const quant::NormQParams> normq_params,
                                    const SaParams& params);

// V path on precomputed projection sums: per-channel scale, then quantize.
QuantTensor v_quantize_rows(const IntMat& acc,
                            std::span<const std::int64_t> v_scale_fix,
                            const SaParams& params);

// Softmax path on precomputed Q~ K~^T sums. `pairing`, when non-empty, maps
// post-aggregation slot k to the element index it consumes (identity in a
// correctly aligned array; the simulator uses it for fault injection).
QuantTensor attention_from_logits(const IntMat& logits, const SaParams& params,
                                  quant::ExpStats* stats = nullptr,
                                  std::span<const int> pairing = {});

QuantTensor attention_scores(const QuantTensor& q3b, const QuantTensor& k3b,
                             const SaParams& params,
                             quant::ExpStats* stats = nullptr);

// SA output quantizer on precomputed A V sums.
QuantTensor av_quantize(const IntMat& acc, const SaParams& params);

QuantTensor weighted_value(const QuantTensor& a3b, const QuantTensor& v3b,
                           const SaParams& params);

HeadOutputs run_sa_head(const QuantTensor& z3b, const SaParams& params,
                        int head, quant::ExpStats* stats = nullptr);

// Host side: concatenate heads, low-bit projection, dequantize, residual add.
RealMat msa_host_side(const std::vector<QuantTensor>& sa_heads,
                      const QuantTensor& u_msa, const RealMat& z_full,
                      double step_sa);

struct MsaResult {
  std::vector<HeadOutputs> heads;
  RealMat msa;  // dequantized output incl. residual
};
MsaResult run_msa_golden(const QuantTensor& z3b, const SaParams& params,
                         const RealMat& z_full);

// Full-precision reference: true exp and true LN, real weights derived from
// the quantized parameter bank.
RealMat float_reference_msa(const RealMat& z, const SaParams& params);

// ---- synthetic test vectors ----

struct Synthetic {
  SaParams params;
  QuantTensor z3b;
  RealMat z_full;
};
Synthetic make_synthetic(const ModelDims& dims,
                         const quant::FixedPointParams& fp,
                         std::uint64_t seed);

struct ErrorSummary {
  double max_abs = 0.0;
  double mean_abs = 0.0;
};
ErrorSummary compare(const RealMat& a, const RealMat& b);

}  // namespace vitsa::model
