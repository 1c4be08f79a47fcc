#pragma once

#include <cstdint>
#include <string>

#include "vitsa/tensor.hpp"

namespace vitsa::perf {

using model::ModelDims;

// Inputs of the closed-form timing model. bus_bits == 0 models an
// infinitely wide bus (communication terms vanish).
struct TimingInputs {
  ModelDims dims;
  int mul_cycles = 1;
  int bus_bits = 64;
  double clock_ns = 2.5;
  int exp_depth = 4;  // pipeline depth of the exponential unit

  void validate() const;
};

// Which term of the issue-pitch three-way max binds.
enum class PitchBound { InputLoad, ComputeDrain, Communication };

struct PitchReport {
  std::int64_t cycles = 0;
  PitchBound bound = PitchBound::InputLoad;
  std::int64_t input_load = 0;     // N + d
  std::int64_t compute_drain = 0;  // d_h + 2N
  std::int64_t communication = 0;  // ceil(3Nd / (bus * H))
};

struct AnalyticReport {
  std::int64_t sa_latency_cycles = 0;
  std::int64_t msa_latency_cycles = 0;
  std::int64_t pitch_cycles = 0;
  std::int64_t comm_cycles = 0;
  std::int64_t layer_cycles = 0;
  std::int64_t model_cycles = 0;
  double latency_us = 0.0;
  double tokens_per_s = 0.0;
  double bandwidth_GBps = 0.0;
  double op_per_byte = 0.0;
  double normalized_power = 0.0;
};

// Latency of one self-attention head on the array, in cycles.
std::int64_t sa_latency(const TimingInputs& t);

// Cycles to stream all three weight matrices of one MSA over the bus.
std::int64_t comm_cycles(const TimingInputs& t);

// Head issue interval: max of input load, compute drain, per-head traffic.
PitchReport pitch(const TimingInputs& t);

// Full MSA latency with head pipelining and double-buffered weight traffic.
// Requires the traffic of one MSA to fit under the compute of the previous
// one; throws ConfigError otherwise.
std::int64_t msa_latency(const TimingInputs& t);

// Per-layer and whole-model cycle/latency estimate.
AnalyticReport full_model_latency(const TimingInputs& t, int layers);

// Raw bus bandwidth (GB = 1024 * 10^6 bytes) and operational intensity.
double bandwidth_gbps(const TimingInputs& t);
double op_per_byte(double total_ops, double total_bytes);

// Relative dynamic power of a MAC workload, quadratic in bit width.
double normalized_power(double ops, int bitwidth);

struct DennardPair {
  double throughput = 0.0;
  double power_eff = 0.0;
};
// Scale results from a node alpha x more advanced back to the reference.
DennardPair dennard_normalize(double throughput, double power_eff,
                              double alpha);

// Attainable throughput under the roofline.
double roofline_point(const TimingInputs& t, double intensity,
                      double peak_ops);

// DSP-free multi-pass variant: extra cycles per head.
std::int64_t dsp_free_extra_cycles(const TimingInputs& t, int passes);

const char* pitch_bound_name(PitchBound b);

}  // namespace vitsa::perf
