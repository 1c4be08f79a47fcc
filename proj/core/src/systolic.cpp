#include "vitsa/systolic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace vitsa::sim {

void ArrayConfig::validate() const {
  if (mul_cycles < 1) throw ConfigError("mul_cycles must be >= 1");
  if (variant == Variant::dsp_free && mul_cycles < 2)
    throw ConfigError("dsp_free requires mul_cycles >= 2");
  if (variant == Variant::dsp_free && mul_cycles > 4)
    throw ConfigError("dsp_free supports at most 4 multiplier passes");
  if (bus_bits < 0) throw ConfigError("bus_bits must be >= 0 (0 = infinite)");
  if (!(clock_ns > 0)) throw ConfigError("clock_ns must be positive");
  if (exp_depth < 1) throw ConfigError("exp_depth must be >= 1");
  if (max_pe < 0) throw ConfigError("max_pe must be >= 0");
}

// ---- MacArray ----

MacArray::MacArray(int rows, int cols, int acc_bits)
    : rows_(rows), cols_(cols), acc_bits_(acc_bits) {
  if (rows < 1 || cols < 1) throw ConfigError("array dims must be >= 1");
  if (acc_bits < 2 || acc_bits > 63) throw ConfigError("bad acc_bits");
  limit_ = (std::int64_t{1} << (acc_bits - 1)) - 1;
  grid_.resize(static_cast<std::size_t>(rows) * cols);
}

void MacArray::set_weights(const IntMat& w) {
  if (w.rows != rows_ || w.cols != cols_)
    throw Error("weight shape mismatch");
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      grid_[static_cast<std::size_t>(r) * cols_ + c].weight = w.at(r, c);
}

void MacArray::reset() {
  for (auto& pe : grid_) {
    pe.x = 0;
    pe.sum = 0;
  }
}

void MacArray::step(std::span<const std::int64_t> x_in) {
  if (static_cast<int>(x_in.size()) != rows_)
    throw Error("one input per row required");
  // In-place two-phase update: walking rows bottom-up and columns
  // right-to-left only ever reads neighbor state of the previous cycle.
  for (int r = rows_ - 1; r >= 0; --r) {
    auto* row = grid_.data() + static_cast<std::size_t>(r) * cols_;
    const auto* above =
        r == 0 ? nullptr : grid_.data() + static_cast<std::size_t>(r - 1) * cols_;
    for (int c = cols_ - 1; c >= 0; --c) {
      const std::int64_t x = c == 0 ? x_in[static_cast<std::size_t>(r)]
                                    : row[c - 1].x;
      const std::int64_t sum_in = above ? above[c].sum : 0;
      const std::int64_t sum = x * row[c].weight + sum_in;
      if (sum > limit_ || sum < -limit_ - 1)
        throw OverflowError("PE accumulator overflow");
      row[c].x = x;
      row[c].sum = sum;
    }
  }
}

IntMat array_matmul(MacArray& array, const IntMat& x) {
  if (x.cols != array.rows()) throw Error("matmul shape mismatch");
  array.reset();
  const int n = x.rows;
  const int rows = array.rows();
  const int cols = array.cols();
  IntMat out(n, cols);
  std::vector<std::int64_t> x_in(static_cast<std::size_t>(rows));
  const int last = (n - 1) + (rows - 1) + (cols - 1);
  for (int t = 0; t <= last; ++t) {
    for (int r = 0; r < rows; ++r) {
      const int tok = t - r;  // token tok enters row r at cycle tok + r
      x_in[static_cast<std::size_t>(r)] =
          (tok >= 0 && tok < n) ? x.at(tok, r) : 0;
    }
    array.step(x_in);
    for (int c = 0; c < cols; ++c) {
      const int tok = t - (rows - 1) - c;
      if (tok >= 0 && tok < n) out.at(tok, c) = array.bottom_sum(c);
    }
  }
  return out;
}

// ---- WeightLoader ----

WeightLoader::WeightLoader(int chain_len) {
  if (chain_len < 1) throw ConfigError("chain length must be >= 1");
  chain_.resize(static_cast<std::size_t>(chain_len));
  latches_.resize(static_cast<std::size_t>(chain_len));
}

void WeightLoader::step(std::int64_t input, bool enable) {
  for (std::size_t i = chain_.size() - 1; i > 0; --i)
    chain_[i] = chain_[i - 1];
  chain_[0] = input;
  if (fill_ < static_cast<int>(chain_.size())) ++fill_;
  if (enable) {
    if (fill_ < static_cast<int>(chain_.size())) throw Error("premature latch");
    latches_ = chain_;
    latched_ = true;
  }
}

// ---- TriangularDelay ----

TriangularDelay::TriangularDelay(int columns, bool fault)
    : cols_(columns), fault_(fault) {
  if (columns < 1) throw ConfigError("columns must be >= 1");
}

int TriangularDelay::delay(int column) const {
  if (column < 0 || column >= cols_) throw Error("column out of range");
  // the fault hook inserts one extra stage into every column
  return column + (fault_ ? 1 : 0);
}

std::vector<int> TriangularDelay::pairing() const {
  std::vector<int> p(static_cast<std::size_t>(cols_));
  for (int k = 0; k < cols_; ++k) {
    // slot k fires k cycles after the aggregation head; it consumes the
    // element whose total delay equals k (a stale register under fault)
    p[static_cast<std::size_t>(k)] = fault_ ? std::max(0, k - 1) : k;
  }
  return p;
}

// ---- Fifo ----

Fifo::Fifo(std::size_t capacity) : cap_(capacity) {
  if (capacity == 0) throw ConfigError("fifo capacity must be >= 1");
}

void Fifo::push(std::int64_t v) {
  if (q_.size() >= cap_)
    throw Error("fifo overflow: static schedule violated");
  q_.push_back(v);
}

std::int64_t Fifo::pop() {
  if (q_.empty()) throw Error("fifo underflow: static schedule violated");
  const std::int64_t v = q_.front();
  q_.pop_front();
  return v;
}

// ---- structure graph ----

bool check_locality(const StructureGraph& g, std::string* error) {
  for (const auto& e : g.edges) {
    if (e.kind != EdgeKind::data) continue;
    const auto& a = g.nodes[static_cast<std::size_t>(e.from)];
    const auto& b = g.nodes[static_cast<std::size_t>(e.to)];
    const int dist = std::abs(a.x - b.x) + std::abs(a.y - b.y);
    if (dist != 1) {
      if (error)
        *error = "non-local data edge " + a.name + " -> " + b.name;
      return false;
    }
  }
  return true;
}

std::int64_t pe_count(const ModelDims& dims) {
  const std::int64_t d = dims.embed_dim;
  const std::int64_t dh = dims.head_dim();
  const std::int64_t n = dims.n_tokens;
  return 3 * d * dh + 2 * dh * n;
}

namespace {

// One weight-stationary array with its post-MAC row; returns the x offset of
// the next free column band.
int add_ws_array(StructureGraph& g, const std::string& name, int rows,
                 int cols, int x0, bool with_aggregation, bool with_loader,
                 std::vector<int>* postmac_ids, std::vector<int>* out_ids) {
  auto add = [&](const std::string& n, int x, int y) {
    g.nodes.push_back(GraphNode{n, x, y});
    return static_cast<int>(g.nodes.size()) - 1;
  };
  std::vector<int> ids(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      ids[static_cast<std::size_t>(r) * cols + c] =
          add(name + ".pe", x0 + c, r);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int id = ids[static_cast<std::size_t>(r) * cols + c];
      if (c + 1 < cols)
        g.edges.push_back(
            {id, ids[static_cast<std::size_t>(r) * cols + c + 1],
             EdgeKind::data});  // x rightward
      if (r + 1 < rows)
        g.edges.push_back(
            {id, ids[static_cast<std::size_t>(r + 1) * cols + c],
             EdgeKind::data});  // partial sum downward
    }
  }
  if (with_loader) {
    const int enable = add(name + ".enable", x0 - 1, -1);
    for (int r = 0; r < rows; ++r) {
      const int in = add(name + ".wload", x0 - 1, r);
      g.edges.push_back({in, ids[static_cast<std::size_t>(r) * cols],
                         EdgeKind::data});
      g.edges.push_back({enable, in, EdgeKind::enable});
    }
  }
  std::vector<int> pm(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) {
    pm[static_cast<std::size_t>(c)] = add(name + ".postmac", x0 + c, rows);
    g.edges.push_back({ids[static_cast<std::size_t>(rows - 1) * cols + c],
                       pm[static_cast<std::size_t>(c)], EdgeKind::data});
  }
  std::vector<int> outs = pm;
  if (with_aggregation) {
    // aggregation row (right-to-left), delay row (element + returned sum),
    // post-aggregation quantizer row
    std::vector<int> agg(static_cast<std::size_t>(cols));
    std::vector<int> del(static_cast<std::size_t>(cols));
    std::vector<int> pq(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) {
      agg[static_cast<std::size_t>(c)] = add(name + ".agg", x0 + c, rows + 1);
      del[static_cast<std::size_t>(c)] = add(name + ".delay", x0 + c, rows + 2);
      pq[static_cast<std::size_t>(c)] = add(name + ".postagg", x0 + c, rows + 3);
    }
    for (int c = 0; c < cols; ++c) {
      g.edges.push_back({pm[static_cast<std::size_t>(c)],
                         agg[static_cast<std::size_t>(c)], EdgeKind::data});
      if (c + 1 < cols)  // combine with the accumulated result from the left
        g.edges.push_back({agg[static_cast<std::size_t>(c)],
                           agg[static_cast<std::size_t>(c + 1)],
                           EdgeKind::data});
      g.edges.push_back({agg[static_cast<std::size_t>(c)],
                         del[static_cast<std::size_t>(c)], EdgeKind::data});
      if (c > 0)  // final sum travels back along the delay row
        g.edges.push_back({del[static_cast<std::size_t>(c)],
                           del[static_cast<std::size_t>(c - 1)],
                           EdgeKind::data});
      g.edges.push_back({del[static_cast<std::size_t>(c)],
                         pq[static_cast<std::size_t>(c)], EdgeKind::data});
    }
    outs = pq;
  }
  if (postmac_ids) *postmac_ids = pm;
  if (out_ids) *out_ids = outs;
  return x0 + cols + 2;
}

}  // namespace

// ---- trace ----

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::input_first: return "input_first";
    case EventKind::input_last: return "input_last";
    case EventKind::weight_latch: return "weight_latch";
    case EventKind::agg_done: return "agg_done";
    case EventKind::output_first: return "output_first";
    case EventKind::output_last: return "output_last";
    case EventKind::head_switch: return "head_switch";
  }
  return "unknown";
}

void CycleTrace::append(std::int64_t cycle, const std::string& unit,
                        EventKind kind) {
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (it->unit == unit) {
      if (it->cycle > cycle)
        throw Error("trace cycles must be non-decreasing per unit");
      break;
    }
  }
  events.push_back(TraceEvent{cycle, unit, kind});
}

std::int64_t CycleTrace::at(const std::string& unit, EventKind kind,
                            int nth) const {
  int seen = 0;
  for (const auto& e : events) {
    if (e.unit == unit && e.kind == kind) {
      if (seen == nth) return e.cycle;
      ++seen;
    }
  }
  throw Error("trace event not found: " + unit + "/" + event_kind_name(kind));
}

// ---- accelerator ----

Accelerator Accelerator::build_sa_pipeline(const ModelDims& dims,
                                           const ArrayConfig& cfg,
                                           const model::SaParams& params) {
  dims.validate();
  cfg.validate();
  params.validate();
  if (params.dims.n_tokens != dims.n_tokens ||
      params.dims.embed_dim != dims.embed_dim ||
      params.dims.heads != dims.heads)
    throw ConfigError("parameter bank does not match model dims");
  const std::int64_t pes = pe_count(dims);
  if (cfg.max_pe > 0 && pes > cfg.max_pe)
    throw ConfigError("resource model violation: design needs " +
                      std::to_string(pes) + " PEs, limit is " +
                      std::to_string(cfg.max_pe));

  Accelerator acc;
  acc.dims_ = dims;
  acc.cfg_ = cfg;
  acc.params_ = params;

  StructureGraph& g = acc.graph_;
  const int d = dims.embed_dim;
  const int dh = dims.head_dim();
  const int n = dims.n_tokens;
  std::vector<int> q_pm, k_pm, v_pm, a_out, av_out;
  int x0 = 0;
  x0 = add_ws_array(g, "q", d, dh, x0, false, false, &q_pm, nullptr);
  x0 = add_ws_array(g, "k", d, dh, x0, false, false, &k_pm, nullptr);
  x0 = add_ws_array(g, "v", d, dh, x0, false, false, &v_pm, nullptr);
  x0 = add_ws_array(g, "a", dh, n, x0 + 1, true, true, nullptr, &a_out);
  add_ws_array(g, "av", n, dh, x0 + 1, false, true, nullptr, &av_out);
  // inter-array transport is explicit FIFO (no random access)
  auto fifo_edge = [&](const std::string& from, const std::string& to) {
    auto find = [&](const std::string& name) {
      for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].name == name) return static_cast<int>(i);
      throw Error("graph node missing: " + name);
    };
    g.edges.push_back({find(from), find(to), EdgeKind::fifo});
  };
  fifo_edge("q.postmac", "a.pe");
  fifo_edge("k.postmac", "a.wload");
  fifo_edge("a.postagg", "av.pe");
  fifo_edge("v.postmac", "av.wload");

  std::string err;
  if (!check_locality(g, &err)) throw Error("locality audit failed: " + err);
  return acc;
}

std::int64_t Accelerator::pe_total() const { return pe_count(dims_); }

perf::TimingInputs Accelerator::timing() const {
  perf::TimingInputs t;
  t.dims = dims_;
  t.mul_cycles = cfg_.mul_cycles;
  t.bus_bits = cfg_.bus_bits;
  t.clock_ns = cfg_.clock_ns;
  t.exp_depth = cfg_.exp_depth;
  return t;
}

namespace {

// Static per-head schedule, relative to the head start cycle. The constants
// account for the fixed register stages between units (post-MAC, NormQ,
// reorder, scale, exponential return path, quantizers).
struct HeadSchedule {
  std::int64_t input_first = 0;
  std::int64_t input_last = 0;
  std::int64_t weight_latch = 0;
  std::int64_t agg_done = 0;
  std::int64_t output_first = 0;
  std::int64_t output_last = 0;
  std::int64_t sa_total = 0;  // output_last + 1
};

HeadSchedule make_schedule(const ModelDims& dims, const ArrayConfig& cfg) {
  const std::int64_t d = dims.embed_dim;
  const std::int64_t dh = dims.head_dim();
  const std::int64_t n = dims.n_tokens;
  const std::int64_t e = cfg.exp_depth;
  // the dsp variant spends M cycles per full-precision multiply; the
  // dsp_free variant keeps single-cycle issue and pays per-pass overheads
  const std::int64_t m = cfg.variant == Variant::dsp ? cfg.mul_cycles : 1;
  const std::int64_t p =
      cfg.variant == Variant::dsp_free ? cfg.mul_cycles : 1;

  HeadSchedule s;
  s.input_first = 0;
  s.input_last = n + d - 1;
  // first K~/Q~ row leaves the projection + normalization path
  std::int64_t t_k = d + 2 * dh + 3 * m + 2 + (p - 1) * (dh + 1) +
                     (p > 1 ? 4 : 0);
  s.weight_latch = t_k + (n - 1) + dh + 1;
  const std::int64_t t_a_last = s.weight_latch + 1 + (n - 1) +
                                dh * (m + 1) + (n - 1) + e + m + 11 +
                                (p - 1);
  s.agg_done = t_a_last;
  s.output_first = t_a_last - (n - 1) + m + 7 + (p - 1);
  s.output_last = t_a_last + m + 7 + (p - 1);
  s.sa_total = s.output_last + 1;
  return s;
}

}  // namespace

SimResult Accelerator::run_msa(const QuantTensor& z3b) const {
  if (z3b.codes.rows != dims_.n_tokens || z3b.codes.cols != dims_.embed_dim)
    throw ConfigError("input shape must be (n_tokens, embed_dim)");
  z3b.validate();

  const perf::TimingInputs t = timing();
  const std::int64_t comm = perf::comm_cycles(t);
  const std::int64_t pitch = perf::pitch(t).cycles;
  const HeadSchedule sched = make_schedule(dims_, cfg_);
  const std::int64_t sa = sched.sa_total;
  const std::int64_t h = dims_.heads;
  if (comm > sa + (h - 1) * pitch)
    throw ConfigError(
        "weight traffic exceeds the compute span; cannot overlap "
        "communication with the previous MSA");

  SimResult res;
  const std::int64_t t0 = comm;  // leading stream of the first MSA
  if (comm > 0) {
    res.trace.append(0, "bus", EventKind::input_first);
    res.trace.append(comm - 1, "bus", EventKind::input_last);
  }

  const int d = dims_.embed_dim;
  const int dh = dims_.head_dim();
  const int n = dims_.n_tokens;
  const int acc_bits = params_.fp.acc_bits;

  MacArray proj(d, dh, acc_bits);
  MacArray a_arr(dh, n, acc_bits);
  MacArray av_arr(n, dh, acc_bits);
  const TriangularDelay tri(n, cfg_.fault_triangular);
  const std::vector<int> pairing = tri.pairing();

  auto weights_of = [](const QuantTensor& w) { return w.codes; };

  for (int head = 0; head < dims_.heads; ++head) {
    const std::int64_t s0 = t0 + head * pitch;
    res.trace.append(s0, "selector", EventKind::head_switch);
    res.trace.append(s0 + sched.input_first, "input", EventKind::input_first);
    res.trace.append(s0 + sched.input_last, "input", EventKind::input_last);

    const model::HeadParams& hp = params_.head[static_cast<std::size_t>(head)];
    proj.set_weights(weights_of(hp.u_q));
    const IntMat q_acc = array_matmul(proj, z3b.codes);
    proj.set_weights(weights_of(hp.u_k));
    const IntMat k_acc = array_matmul(proj, z3b.codes);
    proj.set_weights(weights_of(hp.u_v));
    const IntMat v_acc = array_matmul(proj, z3b.codes);

    model::HeadOutputs out;
    out.q3b = model::layernorm_quantize_rows(q_acc, hp.q_scale_fix, hp.q_bias,
                                             hp.q_normq, params_);
    out.k3b = model::layernorm_quantize_rows(k_acc, hp.k_scale_fix, hp.k_bias,
                                             hp.k_normq, params_);
    out.v3b = model::v_quantize_rows(v_acc, hp.v_scale_fix, params_);

    // K~ reorder: rows arrive in systolic order, pass through the FIFO into
    // one shift chain per array row, and latch together.
    Fifo reorder(static_cast<std::size_t>(dh));
    std::vector<WeightLoader> loaders(static_cast<std::size_t>(dh),
                                      WeightLoader(n));
    for (int row = 0; row < n; ++row) {
      for (int r = 0; r < dh; ++r) reorder.push(out.k3b.codes.at(row, r));
      const bool enable = row == n - 1;
      for (int r = 0; r < dh; ++r)
        loaders[static_cast<std::size_t>(r)].step(reorder.pop(), enable);
    }
    res.trace.append(s0 + sched.weight_latch, "a_loader",
                     EventKind::weight_latch);
    IntMat k_stationary(dh, n);
    for (int r = 0; r < dh; ++r)
      for (int col = 0; col < n; ++col)
        k_stationary.at(r, col) =
            loaders[static_cast<std::size_t>(r)].latches()
                [static_cast<std::size_t>(n - 1 - col)];

    a_arr.set_weights(k_stationary);
    const IntMat logits = array_matmul(a_arr, out.q3b.codes);
    out.a3b = model::attention_from_logits(logits, params_, nullptr, pairing);
    res.trace.append(s0 + sched.agg_done, "aggregate", EventKind::agg_done);

    av_arr.set_weights(weights_of(out.v3b));
    const IntMat sa_acc = array_matmul(av_arr, out.a3b.codes);
    out.sa3b = model::av_quantize(sa_acc, params_);
    res.trace.append(s0 + sched.output_first, "output",
                     EventKind::output_first);
    res.trace.append(s0 + sched.output_last, "output", EventKind::output_last);
    res.heads.push_back(std::move(out));
  }

  const std::int64_t final_cycle = t0 + (h - 1) * pitch + sa + comm;
  if (comm > 0) {
    res.trace.append(final_cycle - comm, "bus", EventKind::output_first);
    res.trace.append(final_cycle - 1, "bus", EventKind::output_last);
  }
  res.trace.final_cycle = final_cycle;

  SimSummary& sum = res.summary;
  sum.sa_latency_cycles = sa;
  sum.pitch_cycles = pitch;
  sum.msa_latency_cycles = final_cycle;
  sum.comm_cycles_ideal = comm;
  if (cfg_.bus_bits > 0) {
    const std::int64_t codes_per_word = cfg_.bus_bits / 3;
    if (codes_per_word < 1)
      throw ConfigError("bus narrower than one code");
    const std::int64_t codes = static_cast<std::int64_t>(n) * d;
    sum.comm_cycles_packed = (codes + codes_per_word - 1) / codes_per_word;
  }
  sum.weight_hold_cycles = pitch;
  sum.input_codes_pipelined = static_cast<std::int64_t>(n) * d;
  sum.input_codes_daisy = sum.input_codes_pipelined * h;
  sum.latency_us = static_cast<double>(final_cycle) * cfg_.clock_ns / 1000.0;
  return res;
}

SimResult Accelerator::run_dsp_free(const QuantTensor& z3b) const {
  if (cfg_.variant != Variant::dsp_free)
    throw ConfigError("run_dsp_free requires the dsp_free variant");
  return run_msa(z3b);
}

}  // namespace vitsa::sim
