#include "vitsa/config.hpp"

#include <fstream>
#include <sstream>

namespace vitsa::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: " + v);
  }
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': not a boolean: " + v);
}

}  // namespace

void RunConfig::validate() const {
  dims.validate();
  array.validate();
  fixedpoint.validate();
  if (layers < 1) throw ConfigError("layers must be >= 1");
  // accumulator overflow audit: worst-case projection MAC sum
  const std::int64_t limit =
      (std::int64_t{1} << (fixedpoint.acc_bits - 1)) - 1;
  const std::int64_t maxc = quant::max_code(dims.bits, quant::Sign::Signed);
  if (maxc * maxc * dims.embed_dim > limit)
    throw ConfigError("projection accumulator can overflow acc_bits");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "n_tokens") c.dims.n_tokens = static_cast<int>(to_int(key, val));
    else if (key == "embed_dim") c.dims.embed_dim = static_cast<int>(to_int(key, val));
    else if (key == "heads") c.dims.heads = static_cast<int>(to_int(key, val));
    else if (key == "mlp_ratio") c.dims.mlp_ratio = static_cast<int>(to_int(key, val));
    else if (key == "bits") c.dims.bits = static_cast<int>(to_int(key, val));
    else if (key == "mul_cycles") c.array.mul_cycles = static_cast<int>(to_int(key, val));
    else if (key == "bus_bits") c.array.bus_bits = static_cast<int>(to_int(key, val));
    else if (key == "clock_ns") c.array.clock_ns = to_real(key, val);
    else if (key == "exp_depth") c.array.exp_depth = static_cast<int>(to_int(key, val));
    else if (key == "max_pe") c.array.max_pe = to_int(key, val);
    else if (key == "fault_triangular") c.array.fault_triangular = to_bool(key, val);
    else if (key == "variant") {
      if (val == "dsp") c.array.variant = sim::Variant::dsp;
      else if (val == "dsp_free") c.array.variant = sim::Variant::dsp_free;
      else throw ConfigError("config key 'variant': expected dsp or dsp_free");
    }
    else if (key == "nu_exp") c.fixedpoint.nu_exp = static_cast<int>(to_int(key, val));
    else if (key == "prescale") c.fixedpoint.prescale = static_cast<int>(to_int(key, val));
    else if (key == "exp_prescale") c.fixedpoint.exp_prescale = static_cast<int>(to_int(key, val));
    else if (key == "acc_bits") c.fixedpoint.acc_bits = static_cast<int>(to_int(key, val));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, val));
    else if (key == "layers") c.layers = static_cast<int>(to_int(key, val));
    else if (key == "mode") c.mode = parse_mode(val);
    else if (key == "out_dir") c.out_dir = val;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "deit-t") {
    c.dims = model::ModelDims{198, 192, 3, 4, 3};
  } else if (name == "deit-s") {
    c.dims = model::ModelDims{198, 384, 6, 4, 3};
  } else if (name == "deit-b") {
    c.dims = model::ModelDims{198, 768, 12, 4, 3};
  } else if (name == "toy") {
    c.dims = model::ModelDims{8, 12, 3, 4, 3};
  } else {
    throw ConfigError("unknown preset '" + name +
                      "' (expected deit-t, deit-s, deit-b, toy)");
  }
  c.validate();
  return c;
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream o;
  o << "acc_bits = " << c.fixedpoint.acc_bits << "\n";
  o << "bits = " << c.dims.bits << "\n";
  o << "bus_bits = " << c.array.bus_bits << "\n";
  o << "clock_ns = " << c.array.clock_ns << "\n";
  o << "embed_dim = " << c.dims.embed_dim << "\n";
  o << "exp_depth = " << c.array.exp_depth << "\n";
  o << "exp_prescale = " << c.fixedpoint.exp_prescale << "\n";
  o << "fault_triangular = " << (c.array.fault_triangular ? "true" : "false")
    << "\n";
  o << "heads = " << c.dims.heads << "\n";
  o << "layers = " << c.layers << "\n";
  o << "max_pe = " << c.array.max_pe << "\n";
  o << "mlp_ratio = " << c.dims.mlp_ratio << "\n";
  o << "mode = " << mode_name(c.mode) << "\n";
  o << "mul_cycles = " << c.array.mul_cycles << "\n";
  o << "n_tokens = " << c.dims.n_tokens << "\n";
  o << "nu_exp = " << c.fixedpoint.nu_exp << "\n";
  o << "out_dir = " << c.out_dir << "\n";
  o << "prescale = " << c.fixedpoint.prescale << "\n";
  o << "seed = " << c.seed << "\n";
  o << "variant = "
    << (c.array.variant == sim::Variant::dsp ? "dsp" : "dsp_free") << "\n";
  return o.str();
}

Mode parse_mode(const std::string& s) {
  if (s == "func") return Mode::func;
  if (s == "sim") return Mode::sim;
  if (s == "verify") return Mode::verify;
  if (s == "analyze") return Mode::analyze;
  if (s == "sweep") return Mode::sweep;
  throw ConfigError("unknown mode '" + s + "'");
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::func: return "func";
    case Mode::sim: return "sim";
    case Mode::verify: return "verify";
    case Mode::analyze: return "analyze";
    case Mode::sweep: return "sweep";
  }
  return "unknown";
}

}  // namespace vitsa::cli
