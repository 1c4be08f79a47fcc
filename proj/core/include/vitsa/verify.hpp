#pragma once

#include <string>
#include <vector>

#include "vitsa/config.hpp"

namespace vitsa::verify {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Full cross-validation suite: arithmetic oracles, golden-vs-sim
// bit-exactness, analytics-vs-trace exactness, dsp vs dsp_free.
// Honors cfg.array.fault_triangular (the mutation hook) and cfg.seed.
std::vector<Check> run_verify(const cli::RunConfig& cfg);

bool all_pass(const std::vector<Check>& checks);

// Stable flat text report, one "name = pass|fail detail" line per check.
std::string report_text(const std::vector<Check>& checks);

}  // namespace vitsa::verify
