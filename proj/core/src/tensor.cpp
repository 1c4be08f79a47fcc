#include "vitsa/tensor.hpp"

namespace vitsa::model {

void ModelDims::validate() const {
  if (n_tokens < 1 || embed_dim < 1 || heads < 1 || mlp_ratio < 1)
    throw ConfigError("model dims must be >= 1");
  if (embed_dim % heads != 0)
    throw ConfigError("embed_dim must be divisible by heads");
  if (bits < 2 || bits > 8) throw ConfigError("bits out of range [2, 8]");
}

void QuantTensor::validate() const {
  if (step_channels.empty() == (step_global == 0.0))
    throw Error("exactly one of global/per-channel step must be set");
  if (per_channel() &&
      static_cast<int>(step_channels.size()) != codes.cols)
    throw Error("per-channel step length must match column count");
  const int lo = quant::min_code(bits, sign);
  const int hi = quant::max_code(bits, sign);
  for (std::int64_t c : codes.v) {
    if (c < lo || c > hi) throw Error("code out of declared range");
  }
}

IntMat int_matmul(const IntMat& a, const IntMat& b) {
  if (a.cols != b.rows) throw Error("matmul shape mismatch");
  IntMat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const std::int64_t aik = a.at(i, k);
      if (aik == 0) continue;
      for (int j = 0; j < b.cols; ++j) {
        c.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return c;
}

IntMat int_matmul_bt(const IntMat& a, const IntMat& b) {
  if (a.cols != b.cols) throw Error("matmul shape mismatch");
  IntMat c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      std::int64_t acc = 0;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(j, k);
      c.at(i, j) = acc;
    }
  }
  return c;
}

RealMat dequantize(const QuantTensor& t) {
  RealMat r(t.codes.rows, t.codes.cols);
  for (int i = 0; i < r.rows; ++i)
    for (int j = 0; j < r.cols; ++j) r.at(i, j) = t.dequant(i, j);
  return r;
}

}  // namespace vitsa::model
