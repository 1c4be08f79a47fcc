#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "vitsa/analytics.hpp"
#include "vitsa/msa.hpp"
#include "vitsa/tensor.hpp"

namespace vitsa::sim {

using model::IntMat;
using model::ModelDims;
using model::QuantTensor;

enum class Variant { dsp, dsp_free };

struct ArrayConfig {
  int mul_cycles = 1;  // 1 = dsp variant, 2-4 = dsp_free passes
  int bus_bits = 64;   // 0 models an infinitely wide bus
  double clock_ns = 2.5;
  Variant variant = Variant::dsp;
  int exp_depth = 4;          // exponential unit pipeline depth
  std::int64_t max_pe = 0;    // resource bound, 0 = unlimited
  bool fault_triangular = false;  // off-by-one fault in the delay unit

  void validate() const;
};

// ---- cycle-level building blocks ----

struct PeState {
  std::int64_t weight = 0;
  std::int64_t x = 0;
  std::int64_t sum = 0;
};

// Weight-stationary MAC grid. x moves rightward, partial sums downward;
// updates are two-phase (all PEs read neighbor state of the previous cycle).
class MacArray {
 public:
  MacArray(int rows, int cols, int acc_bits);
  void set_weights(const IntMat& w);  // rows x cols
  void step(std::span<const std::int64_t> x_in);  // one value per row
  std::int64_t bottom_sum(int col) const { return pe(rows_ - 1, col).sum; }
  const PeState& pe(int r, int c) const {
    return grid_[static_cast<std::size_t>(r) * cols_ + c];
  }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  void reset();

 private:
  int rows_, cols_, acc_bits_;
  std::int64_t limit_;
  std::vector<PeState> grid_;
};

// Streams x (N x rows) through the array with the canonical input skew and
// collects the N x cols result from the bottom edge.
IntMat array_matmul(MacArray& array, const IntMat& x);

// Shift chain plus latch bank (one chain; arrays instantiate one per row).
class WeightLoader {
 public:
  explicit WeightLoader(int chain_len);
  // One cycle: shift `input` in; on `enable`, latch the chain atomically.
  void step(std::int64_t input, bool enable);
  const std::vector<std::int64_t>& latches() const { return latches_; }
  bool latched() const { return latched_; }
  int fill_count() const { return fill_; }

 private:
  std::vector<std::int64_t> chain_;
  std::vector<std::int64_t> latches_;
  int fill_ = 0;
  bool latched_ = false;
};

// Column k delays its value stream by k cycles (k+1 under fault injection,
// except column 0), aligning element/sum pairs at the post-aggregation row.
class TriangularDelay {
 public:
  TriangularDelay(int columns, bool fault = false);
  int delay(int column) const;
  // Pairing produced by the timed alignment: result[k] is the index of the
  // element that reaches post-aggregation slot k.
  std::vector<int> pairing() const;
  int columns() const { return cols_; }

 private:
  int cols_;
  bool fault_;
};

// Bounded FIFO; overflow signals a scheduling bug and is a hard error.
class Fifo {
 public:
  explicit Fifo(std::size_t capacity);
  void push(std::int64_t v);
  std::int64_t pop();
  std::size_t size() const { return q_.size(); }
  std::size_t capacity() const { return cap_; }

 private:
  std::size_t cap_;
  std::deque<std::int64_t> q_;
};

// ---- structure graph (locality audit) ----

enum class EdgeKind { data, fifo, enable };

struct GraphNode {
  std::string name;
  int x = 0, y = 0;
};

struct GraphEdge {
  int from = 0, to = 0;
  EdgeKind kind = EdgeKind::data;
};

struct StructureGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
};

// Every data edge must connect Manhattan-adjacent units; fifo endpoints and
// the latch-enable broadcast are the only exemptions.
bool check_locality(const StructureGraph& g, std::string* error = nullptr);

std::int64_t pe_count(const ModelDims& dims);

// ---- accelerator ----

enum class EventKind {
  input_first,
  input_last,
  weight_latch,
  agg_done,
  output_first,
  output_last,
  head_switch,
};
const char* event_kind_name(EventKind k);

struct TraceEvent {
  std::int64_t cycle = 0;
  std::string unit;
  EventKind kind = EventKind::input_first;
};

struct CycleTrace {
  std::vector<TraceEvent> events;
  std::int64_t final_cycle = 0;

  // first matching event; throws if absent
  std::int64_t at(const std::string& unit, EventKind kind, int nth = 0) const;
  void append(std::int64_t cycle, const std::string& unit, EventKind kind);
};

struct SimSummary {
  std::int64_t sa_latency_cycles = 0;
  std::int64_t pitch_cycles = 0;
  std::int64_t msa_latency_cycles = 0;
  std::int64_t comm_cycles_ideal = 0;   // fractional 3-bit packing
  std::int64_t comm_cycles_packed = 0;  // 21 codes + 1 pad bit per 64-bit word
  std::int64_t weight_hold_cycles = 0;
  std::int64_t input_codes_pipelined = 0;  // z streamed once, heads replayed
  std::int64_t input_codes_daisy = 0;      // z streamed once per head
  double latency_us = 0.0;
};

struct SimResult {
  std::vector<model::HeadOutputs> heads;
  CycleTrace trace;
  SimSummary summary;
};

class Accelerator {
 public:
  static Accelerator build_sa_pipeline(const ModelDims& dims,
                                       const ArrayConfig& cfg,
                                       const model::SaParams& params);

  SimResult run_msa(const QuantTensor& z3b) const;
  SimResult run_dsp_free(const QuantTensor& z3b) const;  // variant check

  const StructureGraph& graph() const { return graph_; }
  std::int64_t pe_total() const;
  const ArrayConfig& config() const { return cfg_; }
  perf::TimingInputs timing() const;

 private:
  Accelerator() = default;

  ModelDims dims_;
  ArrayConfig cfg_;
  model::SaParams params_;
  StructureGraph graph_;
};

}  // namespace vitsa::sim
