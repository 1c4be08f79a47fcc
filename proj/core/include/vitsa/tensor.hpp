#pragma once

#include <cstdint>
#include <vector>

#include "vitsa/fixedpoint.hpp"

namespace vitsa::model {

using quant::Sign;

// Model geometry. The class and distillation tokens are part of n_tokens.
struct ModelDims {
  int n_tokens = 198;
  int embed_dim = 384;
  int heads = 6;
  int mlp_ratio = 4;
  int bits = 3;

  int head_dim() const { return embed_dim / heads; }
  void validate() const;
};

// Dense integer matrix, row-major.
struct IntMat {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> v;

  IntMat() = default;
  IntMat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c) {}
  std::int64_t& at(int r, int c) {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  std::int64_t at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
};

// Dense real matrix, row-major.
struct RealMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  RealMat() = default;
  RealMat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c) {}
  double& at(int r, int c) {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
};

// Low-bit tensor: integer codes plus step-size metadata. Activations carry a
// single global step, static weights a per-output-channel step vector.
struct QuantTensor {
  IntMat codes;
  int bits = 3;
  Sign sign = Sign::Signed;
  // exactly one of the two is populated
  double step_global = 0.0;
  std::vector<double> step_channels;

  bool per_channel() const { return !step_channels.empty(); }
  double step(int channel) const {
    return per_channel() ? step_channels[static_cast<std::size_t>(channel)]
                         : step_global;
  }
  void validate() const;

  // Real value of one entry.
  double dequant(int r, int c) const {
    return static_cast<double>(codes.at(r, c)) * step(c);
  }
};

// C = A * B in exact integer arithmetic (A: n x k, B: k x m).
IntMat int_matmul(const IntMat& a, const IntMat& b);

// C = A * B^T (A: n x k, B: m x k).
IntMat int_matmul_bt(const IntMat& a, const IntMat& b);

RealMat dequantize(const QuantTensor& t);

}  // namespace vitsa::model
