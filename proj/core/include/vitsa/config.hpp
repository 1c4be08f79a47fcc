#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vitsa/fixedpoint.hpp"
#include "vitsa/systolic.hpp"
#include "vitsa/tensor.hpp"

namespace vitsa::cli {

enum class Mode { func, sim, verify, analyze, sweep };

struct RunConfig {
  model::ModelDims dims;
  sim::ArrayConfig array;
  quant::FixedPointParams fixedpoint;
  std::uint64_t seed = 1;
  Mode mode = Mode::func;
  int layers = 12;
  std::string out_dir = ".";

  // Rejects dims/overflow problems before any compute starts.
  void validate() const;
};

// Flat key=value text ('#' starts a comment). Unknown keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// deit-t, deit-s, deit-b, toy
RunConfig preset(const std::string& name);

// Stable, diff-friendly serialization (sorted keys).
std::string config_to_text(const RunConfig& c);

Mode parse_mode(const std::string& s);
const char* mode_name(Mode m);

}  // namespace vitsa::cli
