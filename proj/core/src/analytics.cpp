#include "vitsa/analytics.hpp"

#include <algorithm>
#include <cmath>

namespace vitsa::perf {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

}  // namespace

void TimingInputs::validate() const {
  dims.validate();
  if (mul_cycles < 1) throw ConfigError("mul_cycles must be >= 1");
  if (bus_bits < 0) throw ConfigError("bus_bits must be >= 0 (0 = infinite)");
  if (!(clock_ns > 0)) throw ConfigError("clock_ns must be positive");
  if (exp_depth < 1) throw ConfigError("exp_depth must be >= 1");
}

std::int64_t sa_latency(const TimingInputs& t) {
  t.validate();
  const std::int64_t d = t.dims.embed_dim;
  const std::int64_t dh = t.dims.head_dim();
  const std::int64_t n = t.dims.n_tokens;
  const std::int64_t mul = t.mul_cycles;
  return d + 3 * dh + dh * (mul + 1) + 3 * n + 5 * mul + 20 + t.exp_depth;
}

std::int64_t comm_cycles(const TimingInputs& t) {
  t.validate();
  if (t.bus_bits == 0) return 0;
  const std::int64_t bits =
      3ll * t.dims.n_tokens * t.dims.embed_dim;
  return ceil_div(bits, t.bus_bits);
}

PitchReport pitch(const TimingInputs& t) {
  t.validate();
  PitchReport r;
  const std::int64_t n = t.dims.n_tokens;
  r.input_load = n + t.dims.embed_dim;
  r.compute_drain = t.dims.head_dim() + 2 * n;
  r.communication =
      t.bus_bits == 0
          ? 0
          : ceil_div(3ll * n * t.dims.embed_dim,
                     static_cast<std::int64_t>(t.bus_bits) * t.dims.heads);
  r.cycles = std::max({r.input_load, r.compute_drain, r.communication});
  if (r.cycles == r.communication && t.bus_bits != 0) {
    r.bound = PitchBound::Communication;
  } else if (r.cycles == r.compute_drain) {
    r.bound = PitchBound::ComputeDrain;
  } else {
    r.bound = PitchBound::InputLoad;
  }
  return r;
}

std::int64_t msa_latency(const TimingInputs& t) {
  const std::int64_t sa = sa_latency(t);
  const std::int64_t comm = comm_cycles(t);
  const std::int64_t p = pitch(t).cycles;
  const std::int64_t compute_span = sa + (t.dims.heads - 1) * p;
  if (comm > compute_span)
    throw ConfigError(
        "weight traffic exceeds the compute span; communication of the next "
        "MSA cannot hide under the current one");
  return compute_span + 2 * comm;
}

AnalyticReport full_model_latency(const TimingInputs& t, int layers) {
  if (layers < 1) throw ConfigError("layers must be >= 1");
  AnalyticReport r;
  r.sa_latency_cycles = sa_latency(t);
  r.comm_cycles = comm_cycles(t);
  const PitchReport p = pitch(t);
  r.pitch_cycles = p.cycles;
  r.msa_latency_cycles = msa_latency(t);

  const std::int64_t d = t.dims.embed_dim;
  const std::int64_t n = t.dims.n_tokens;
  const std::int64_t h = t.dims.heads;
  // per-head traffic hides under head pipelining in steady state
  const std::int64_t sa_pipelined =
      r.sa_latency_cycles + (h - 1) * (r.comm_cycles / h);
  const std::int64_t projection = 2 * d + n;
  const std::int64_t mlp =
      (static_cast<std::int64_t>(t.dims.mlp_ratio) + 2) * d + n;
  r.layer_cycles = 4 * r.comm_cycles + (sa_pipelined + projection) + mlp;
  r.model_cycles = static_cast<std::int64_t>(layers) * r.layer_cycles;
  r.latency_us = static_cast<double>(r.model_cycles) * t.clock_ns / 1000.0;
  r.tokens_per_s =
      1e9 / t.clock_ns / static_cast<double>(r.pitch_cycles);
  r.bandwidth_GBps = bandwidth_gbps(t);
  return r;
}

double bandwidth_gbps(const TimingInputs& t) {
  t.validate();
  const double bytes_per_cycle = static_cast<double>(t.bus_bits) / 8.0;
  const double clock_hz = 1e9 / t.clock_ns;
  // GB = 1024 * 10^6 bytes (mixed binary/decimal convention)
  return bytes_per_cycle * clock_hz / (1024.0 * 1e6);
}

double op_per_byte(double total_ops, double total_bytes) {
  if (total_ops < 0 || total_bytes <= 0)
    throw ConfigError("ops must be >= 0 and bytes positive");
  return total_ops / total_bytes;
}

double normalized_power(double ops, int bitwidth) {
  if (ops < 0 || bitwidth < 1) throw ConfigError("invalid power inputs");
  const double f = static_cast<double>(bitwidth) / 8.0;
  return ops * f * f;
}

DennardPair dennard_normalize(double throughput, double power_eff,
                              double alpha) {
  if (!(alpha > 0)) throw ConfigError("alpha must be positive");
  return DennardPair{throughput / (alpha * alpha), power_eff / alpha};
}

double roofline_point(const TimingInputs& t, double intensity,
                      double peak_ops) {
  if (intensity < 0 || peak_ops < 0)
    throw ConfigError("roofline inputs must be non-negative");
  return std::min(peak_ops, intensity * bandwidth_gbps(t));
}

std::int64_t dsp_free_extra_cycles(const TimingInputs& t, int passes) {
  t.validate();
  if (passes < 2) throw ConfigError("dsp_free needs >= 2 multiplier passes");
  return static_cast<std::int64_t>(passes - 1) * (t.dims.head_dim() + 3) + 4;
}

const char* pitch_bound_name(PitchBound b) {
  switch (b) {
    case PitchBound::InputLoad:
      return "input_load";
    case PitchBound::ComputeDrain:
      return "compute_drain";
    case PitchBound::Communication:
      return "communication";
  }
  return "unknown";
}

}  // namespace vitsa::perf
