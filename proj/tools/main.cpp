#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "vitsa/analytics.hpp"
#include "vitsa/config.hpp"
#include "vitsa/msa.hpp"
#include "vitsa/systolic.hpp"
#include "vitsa/tensor_io.hpp"
#include "vitsa/verify.hpp"
#include "vitsa/welford.hpp"

namespace fs = std::filesystem;
using namespace vitsa;

namespace {

struct Options {
  std::string config_path;
  std::string preset_name;
  std::string out_dir = "out";
  std::string axes;
  std::string input_path;
  std::int64_t seed = -1;  // -1 = keep config value
};

cli::RunConfig resolve_config(const Options& o, cli::Mode mode) {
  cli::RunConfig c;
  if (!o.config_path.empty()) {
    c = cli::load_config_file(o.config_path);
    if (!o.preset_name.empty()) {
      c.dims = cli::preset(o.preset_name).dims;
      c.validate();
    }
  } else {
    c = cli::preset(o.preset_name.empty() ? "toy" : o.preset_name);
  }
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  c.mode = mode;
  c.out_dir = o.out_dir;
  return c;
}

std::string real_str(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

model::QuantTensor load_input_or_synthetic(const Options& o,
                                           const model::Synthetic& syn) {
  if (o.input_path.empty()) return syn.z3b;
  model::QuantTensor z = io::read_tensor_file(o.input_path);
  if (z.codes.rows != syn.z3b.codes.rows ||
      z.codes.cols != syn.z3b.codes.cols)
    throw ConfigError("input tensor shape does not match configured dims");
  return z;
}

int cmd_func(const Options& o) {
  const cli::RunConfig c = resolve_config(o, cli::Mode::func);
  const auto syn = model::make_synthetic(c.dims, c.fixedpoint, c.seed);
  const model::QuantTensor z3b = load_input_or_synthetic(o, syn);
  model::RealMat z_full = dequantize(z3b);
  const auto golden = model::run_msa_golden(z3b, syn.params, z_full);
  const auto ref = model::float_reference_msa(z_full, syn.params);
  const auto err = model::compare(golden.msa, ref);

  fs::create_directories(c.out_dir);
  io::write_tensor_file((fs::path(c.out_dir) / "z.qt").string(), z3b);
  for (int h = 0; h < c.dims.heads; ++h) {
    const auto name = "head" + std::to_string(h) + "_sa.qt";
    io::write_tensor_file((fs::path(c.out_dir) / name).string(),
                          golden.heads[static_cast<std::size_t>(h)].sa3b);
  }
  std::ostringstream s;
  s << "func.heads = " << c.dims.heads << "\n";
  s << "func.max_abs_error = " << real_str(err.max_abs) << "\n";
  s << "func.mean_abs_error = " << real_str(err.mean_abs) << "\n";
  s << "func.n_tokens = " << c.dims.n_tokens << "\n";
  s << "func.seed = " << c.seed << "\n";
  write_text(fs::path(c.out_dir) / "summary_func.txt", s.str());
  std::cout << s.str();
  return 0;
}

int cmd_sim(const Options& o) {
  const cli::RunConfig c = resolve_config(o, cli::Mode::sim);
  const auto syn = model::make_synthetic(c.dims, c.fixedpoint, c.seed);
  const model::QuantTensor z3b = load_input_or_synthetic(o, syn);
  const auto acc =
      sim::Accelerator::build_sa_pipeline(c.dims, c.array, syn.params);
  const auto res = c.array.variant == sim::Variant::dsp_free
                       ? acc.run_dsp_free(z3b)
                       : acc.run_msa(z3b);

  fs::create_directories(c.out_dir);
  std::vector<sim::TraceEvent> events = res.trace.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const sim::TraceEvent& a, const sim::TraceEvent& b) {
                     return a.cycle < b.cycle;
                   });
  std::ostringstream tr;
  for (const auto& e : events)
    tr << e.cycle << "\t" << e.unit << "\t" << sim::event_kind_name(e.kind)
       << "\n";
  write_text(fs::path(c.out_dir) / "trace.tsv", tr.str());
  for (int h = 0; h < c.dims.heads; ++h) {
    const auto name = "head" + std::to_string(h) + "_sa.qt";
    io::write_tensor_file((fs::path(c.out_dir) / name).string(),
                          res.heads[static_cast<std::size_t>(h)].sa3b);
  }

  const perf::TimingInputs t = acc.timing();
  std::ostringstream s;
  s << "analytics.comm_cycles = " << perf::comm_cycles(t) << "\n";
  s << "analytics.pitch_cycles = " << perf::pitch(t).cycles << "\n";
  if (c.array.variant == sim::Variant::dsp) {
    s << "analytics.msa_latency_cycles = " << perf::msa_latency(t) << "\n";
    s << "analytics.sa_latency_cycles = " << perf::sa_latency(t) << "\n";
  }
  s << "sim.bandwidth_gbps = " << real_str(perf::bandwidth_gbps(t)) << "\n";
  s << "sim.comm_cycles_ideal = " << res.summary.comm_cycles_ideal << "\n";
  s << "sim.comm_cycles_packed = " << res.summary.comm_cycles_packed << "\n";
  s << "sim.input_codes_daisy = " << res.summary.input_codes_daisy << "\n";
  s << "sim.input_codes_pipelined = " << res.summary.input_codes_pipelined
    << "\n";
  s << "sim.latency_us = " << real_str(res.summary.latency_us) << "\n";
  s << "sim.msa_latency_cycles = " << res.summary.msa_latency_cycles << "\n";
  s << "sim.pe_count = " << acc.pe_total() << "\n";
  s << "sim.pitch_cycles = " << res.summary.pitch_cycles << "\n";
  s << "sim.sa_latency_cycles = " << res.summary.sa_latency_cycles << "\n";
  s << "sim.weight_hold_cycles = " << res.summary.weight_hold_cycles << "\n";
  write_text(fs::path(c.out_dir) / "summary_sim.txt", s.str());
  std::cout << s.str();
  return 0;
}

int cmd_analyze(const Options& o) {
  const cli::RunConfig c = resolve_config(o, cli::Mode::analyze);
  perf::TimingInputs t;
  t.dims = c.dims;
  t.mul_cycles = c.array.mul_cycles;
  t.bus_bits = c.array.bus_bits;
  t.clock_ns = c.array.clock_ns;
  t.exp_depth = c.array.exp_depth;
  const auto r = perf::full_model_latency(t, c.layers);
  const auto p = perf::pitch(t);

  std::ostringstream s;
  s << "analyze.bandwidth_gbps = " << real_str(perf::bandwidth_gbps(t)) << "\n";
  s << "analyze.comm_cycles = " << r.comm_cycles << "\n";
  s << "analyze.layer_cycles = " << r.layer_cycles << "\n";
  s << "analyze.layers = " << c.layers << "\n";
  s << "analyze.model_cycles = " << r.model_cycles << "\n";
  s << "analyze.model_latency_us = " << real_str(r.latency_us) << "\n";
  s << "analyze.msa_latency_cycles = " << r.msa_latency_cycles << "\n";
  s << "analyze.msa_latency_us = "
    << real_str(static_cast<double>(r.msa_latency_cycles) * t.clock_ns /
                1000.0)
    << "\n";
  s << "analyze.pe_count = " << sim::pe_count(c.dims) << "\n";
  s << "analyze.pitch_bound = " << perf::pitch_bound_name(p.bound) << "\n";
  s << "analyze.pitch_cycles = " << r.pitch_cycles << "\n";
  s << "analyze.sa_latency_cycles = " << r.sa_latency_cycles << "\n";
  s << "analyze.tokens_per_s = " << real_str(r.tokens_per_s) << "\n";
  fs::create_directories(c.out_dir);
  write_text(fs::path(c.out_dir) / "summary_analyze.txt", s.str());
  std::cout << s.str();
  return 0;
}

int cmd_verify(const Options& o) {
  const cli::RunConfig c = resolve_config(o, cli::Mode::verify);
  const auto checks = verify::run_verify(c);
  const std::string report = verify::report_text(checks);
  fs::create_directories(c.out_dir);
  write_text(fs::path(c.out_dir) / "verify.txt", report);
  std::cout << report;
  return verify::all_pass(checks) ? 0 : 1;
}

struct Axis {
  std::string name;
  std::vector<std::int64_t> values;
};

std::vector<Axis> parse_axes(const std::string& spec) {
  std::vector<Axis> axes;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("axis spec must look like name=v1,v2,...");
    Axis ax;
    ax.name = part.substr(0, eq);
    if (ax.name != "nu_exp" && ax.name != "prescale" &&
        ax.name != "bus_bits" && ax.name != "H" && ax.name != "MUL")
      throw ConfigError("unknown sweep axis '" + ax.name + "'");
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      try {
        ax.values.push_back(std::stoll(v));
      } catch (const std::exception&) {
        throw ConfigError("axis '" + ax.name + "': bad value '" + v + "'");
      }
    }
    if (ax.values.empty())
      throw ConfigError("axis '" + ax.name + "' has no values");
    axes.push_back(std::move(ax));
  }
  if (axes.empty()) throw ConfigError("empty axes spec");
  return axes;
}

int cmd_sweep(const Options& o) {
  const cli::RunConfig base = resolve_config(o, cli::Mode::sweep);
  const std::string spec =
      o.axes.empty() ? "nu_exp=2,3,4,5,6,7,8,9,10" : o.axes;
  const auto axes = parse_axes(spec);

  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();

  struct Row {
    std::vector<std::int64_t> point;
    bool valid = false;
    double max_abs = 0, mean_abs = 0, welford_err = 0;
    std::int64_t sa = 0, pitch = 0, msa = 0;
    double bw = 0;
  };
  std::vector<Row> rows(total);

  auto run_point = [&](std::size_t idx) {
    Row& row = rows[idx];
    std::size_t rem = idx;
    cli::RunConfig c = base;
    for (const auto& a : axes) {
      const std::int64_t v = a.values[rem % a.values.size()];
      rem /= a.values.size();
      row.point.push_back(v);
      if (a.name == "nu_exp") c.fixedpoint.nu_exp = static_cast<int>(v);
      else if (a.name == "prescale") c.fixedpoint.prescale = static_cast<int>(v);
      else if (a.name == "bus_bits") c.array.bus_bits = static_cast<int>(v);
      else if (a.name == "H") c.dims.heads = static_cast<int>(v);
      else if (a.name == "MUL") c.array.mul_cycles = static_cast<int>(v);
    }
    try {
      c.validate();
      const auto syn = model::make_synthetic(c.dims, c.fixedpoint, c.seed);
      const auto golden =
          model::run_msa_golden(syn.z3b, syn.params, syn.z_full);
      const auto ref = model::float_reference_msa(syn.z_full, syn.params);
      const auto err = model::compare(golden.msa, ref);
      row.max_abs = err.max_abs;
      row.mean_abs = err.mean_abs;
      row.welford_err = quant::welford_fixed_error(
          c.fixedpoint.nu_exp, c.fixedpoint.prescale, 200, 64, base.seed);
      perf::TimingInputs t;
      t.dims = c.dims;
      t.mul_cycles = c.array.mul_cycles;
      t.bus_bits = c.array.bus_bits;
      t.clock_ns = c.array.clock_ns;
      t.exp_depth = c.array.exp_depth;
      row.sa = perf::sa_latency(t);
      row.pitch = perf::pitch(t).cycles;
      row.msa = perf::msa_latency(t);
      row.bw = perf::bandwidth_gbps(t);
      row.valid = true;
    } catch (const Error&) {
      row.valid = false;
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(total)));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < total;
           i = next.fetch_add(1))
        run_point(i);
    });
  }
  for (auto& th : pool) th.join();

  std::ostringstream csv;
  for (const auto& a : axes) csv << a.name << ",";
  csv << "valid,max_abs_error,mean_abs_error,welford_err,"
         "sa_cycles,pitch_cycles,msa_cycles,bandwidth_gbps\n";
  for (const auto& row : rows) {
    for (const auto v : row.point) csv << v << ",";
    csv << (row.valid ? 1 : 0) << "," << real_str(row.max_abs) << ","
        << real_str(row.mean_abs) << "," << real_str(row.welford_err) << ","
        << row.sa << "," << row.pitch << "," << row.msa << ","
        << real_str(row.bw) << "\n";
  }
  fs::create_directories(base.out_dir);
  write_text(fs::path(base.out_dir) / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3-bit systolic-array MSA accelerator model"};
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "flat key=value config file");
    sub->add_option("--preset", o.preset_name,
                    "deit-t | deit-s | deit-b | toy");
    sub->add_option("--seed", o.seed, "RNG seed override");
    sub->add_option("--out", o.out_dir, "output directory");
    return sub;
  };
  auto* func = add_common(app.add_subcommand("func", "golden model run"));
  func->add_option("--input", o.input_path, "input tensor file (QT01)");
  auto* simc = add_common(app.add_subcommand("sim", "cycle simulator run"));
  simc->add_option("--input", o.input_path, "input tensor file (QT01)");
  add_common(app.add_subcommand("verify", "cross-validation suite"));
  add_common(app.add_subcommand("analyze", "closed-form performance model"));
  auto* sweep = add_common(app.add_subcommand("sweep", "parameter sweep"));
  sweep->add_option("--axes", o.axes,
                    "grid, e.g. \"nu_exp=2,4,6;bus_bits=8,64\"");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("func")) return cmd_func(o);
    if (app.got_subcommand("sim")) return cmd_sim(o);
    if (app.got_subcommand("verify")) return cmd_verify(o);
    if (app.got_subcommand("analyze")) return cmd_analyze(o);
    if (app.got_subcommand("sweep")) return cmd_sweep(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
