#include "vitsa/verify.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "vitsa/analytics.hpp"
#include "vitsa/msa.hpp"
#include "vitsa/systolic.hpp"
#include "vitsa/welford.hpp"

namespace vitsa::verify {

namespace {

using model::ModelDims;
using model::QuantTensor;

// exact integer round-half-up of x / step
std::int64_t round_half_up_div(std::int64_t x, std::int64_t step) {
  std::int64_t num = 2 * x + step;
  std::int64_t den = 2 * step;
  std::int64_t q = num / den;
  if (num % den != 0 && num < 0) --q;  // floor for negatives
  return q;
}

Check check_comparator(const cli::RunConfig&) {
  Check c{"comparator_vs_linear", true, ""};
  const std::int64_t step = 1000;
  long mismatches = 0;
  for (std::int64_t x = -8000; x <= 8000; ++x) {
    const int got = quant::comparator_quantize(x, step).code;
    std::int64_t want = round_half_up_div(x, step);
    want = std::max<std::int64_t>(0, std::min<std::int64_t>(7, want));
    if (got != want) ++mismatches;
  }
  if (mismatches) {
    c.pass = false;
    c.detail = std::to_string(mismatches) + " mismatches";
  }
  return c;
}

Check check_normq(const cli::RunConfig&) {
  Check c{"normq_vs_real_ln", true, ""};
  // dyadic gammas/betas/steps make the real oracle exact in fixed point,
  // so every sign quadrant can be compared with zero tolerance
  const double step = 0.5;
  long mismatches = 0;
  for (double gamma : {2.0, 0.5, -1.0, -0.5}) {
    for (double beta : {0.25, -0.375, 0.0}) {
      const auto p = quant::NormQParams::make(gamma, beta, step, 3,
                                              quant::Sign::Signed, 12, 1.0);
      for (std::int64_t sigma : {5, 7, 10, 13}) {
        for (std::int64_t d = -40; d <= 40; ++d) {
          const std::int64_t mean = 17;
          const int got =
              quant::normq(mean + d, mean, sigma * sigma, p).code;
          const double value =
              gamma * static_cast<double>(d) / static_cast<double>(sigma) +
              beta;
          const int want =
              quant::quantize_linear(value, step, 3, quant::Sign::Signed).code;
          if (got != want) ++mismatches;
        }
      }
    }
  }
  if (mismatches) {
    c.pass = false;
    c.detail = std::to_string(mismatches) + " mismatches";
  }
  return c;
}

Check check_exp_monotone(const cli::RunConfig& cfg) {
  Check c{"exp_monotone", true, ""};
  const auto& fp = cfg.fixedpoint;
  std::int64_t prev = -1;
  for (std::int64_t x = -8 * fp.exp_prescale; x <= 0; ++x) {
    const std::int64_t y = quant::exp_approx(x, fp);
    if (prev >= 0 && y < prev) {
      c.pass = false;
      c.detail = "decrease at x=" + std::to_string(x);
      return c;
    }
    prev = y;
  }
  return c;
}

Check check_welford_real(const cli::RunConfig& cfg) {
  Check c{"welford_vs_two_pass", true, ""};
  std::mt19937_64 rng(cfg.seed + 99);
  std::normal_distribution<double> dist(3.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(64);
    for (auto& x : xs) x = dist(rng);
    quant::WelfordState st;
    for (double x : xs) st = quant::welford_update(st, x);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double m2 = 0;
    for (double x : xs) m2 += (x - mean) * (x - mean);
    if (std::abs(st.mean - mean) > 1e-9 * std::max(1.0, std::abs(mean)) ||
        std::abs(st.m2 - m2) > 1e-9 * std::max(1.0, m2)) {
      c.pass = false;
      c.detail = "trial " + std::to_string(trial);
      return c;
    }
  }
  return c;
}

bool codes_equal(const QuantTensor& a, const QuantTensor& b) {
  return a.codes.rows == b.codes.rows && a.codes.cols == b.codes.cols &&
         a.codes.v == b.codes.v;
}

Check check_golden_vs_sim(const cli::RunConfig& cfg) {
  Check c{"golden_vs_sim", true, ""};
  const ModelDims toy{8, 12, 3, 4, 3};
  for (int s = 0; s < 3; ++s) {
    const auto syn =
        model::make_synthetic(toy, cfg.fixedpoint, cfg.seed + 10 * s);
    sim::ArrayConfig ac = cfg.array;
    ac.mul_cycles = 1;
    ac.variant = sim::Variant::dsp;
    const auto acc = sim::Accelerator::build_sa_pipeline(toy, ac, syn.params);
    const auto res = acc.run_msa(syn.z3b);
    const auto golden = model::run_msa_golden(syn.z3b, syn.params, syn.z_full);
    for (int h = 0; h < toy.heads; ++h) {
      const auto& sh = res.heads[static_cast<std::size_t>(h)];
      const auto& gh = golden.heads[static_cast<std::size_t>(h)];
      if (codes_equal(sh.sa3b, gh.sa3b) && codes_equal(sh.a3b, gh.a3b))
        continue;
      c.pass = false;
      c.detail = "head " + std::to_string(h) + " codes differ";
      // diagnose the known misalignment signature of the delay unit
      const auto logits = model::int_matmul_bt(gh.q3b.codes, gh.k3b.codes);
      const auto shifted_pairing =
          sim::TriangularDelay(toy.n_tokens, true).pairing();
      const auto shifted = model::attention_from_logits(
          logits, syn.params, nullptr, shifted_pairing);
      if (codes_equal(sh.a3b, shifted))
        c.detail += "; triangular delay misalignment: element/sum pairing "
                    "shifted by one";
      return c;
    }
  }
  return c;
}

Check check_analytics_vs_trace(const cli::RunConfig& cfg) {
  Check c{"analytics_vs_trace", true, ""};
  std::mt19937_64 rng(cfg.seed + 7);
  for (int trial = 0; trial < 8; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 3);
    const int dh = 4 + static_cast<int>(rng() % 5);
    const ModelDims dims{4 + static_cast<int>(rng() % 8), h * dh, h, 4, 3};
    sim::ArrayConfig ac;
    ac.mul_cycles = 1 + static_cast<int>(rng() % 2);
    ac.bus_bits = (trial % 3 == 0) ? 0 : 64;
    const auto syn = model::make_synthetic(dims, cfg.fixedpoint, cfg.seed + trial);
    const auto acc = sim::Accelerator::build_sa_pipeline(dims, ac, syn.params);
    const auto res = acc.run_msa(syn.z3b);
    const auto t = acc.timing();
    const std::int64_t sa_measured =
        res.trace.at("output", sim::EventKind::output_last, 0) -
        res.trace.at("selector", sim::EventKind::head_switch, 0) + 1;
    if (sa_measured != perf::sa_latency(t) ||
        res.summary.pitch_cycles != perf::pitch(t).cycles ||
        res.trace.final_cycle != perf::msa_latency(t)) {
      c.pass = false;
      c.detail = "trial " + std::to_string(trial);
      return c;
    }
  }
  return c;
}

Check check_dsp_free(const cli::RunConfig& cfg) {
  Check c{"dsp_vs_dsp_free", true, ""};
  const ModelDims toy{8, 12, 3, 4, 3};
  const auto syn = model::make_synthetic(toy, cfg.fixedpoint, cfg.seed + 1);
  sim::ArrayConfig base;
  base.mul_cycles = 1;
  const auto res_dsp =
      sim::Accelerator::build_sa_pipeline(toy, base, syn.params)
          .run_msa(syn.z3b);
  sim::ArrayConfig free = base;
  free.variant = sim::Variant::dsp_free;
  free.mul_cycles = 2;
  const auto res_free =
      sim::Accelerator::build_sa_pipeline(toy, free, syn.params)
          .run_dsp_free(syn.z3b);
  for (int h = 0; h < toy.heads; ++h) {
    if (!codes_equal(res_dsp.heads[static_cast<std::size_t>(h)].sa3b,
                     res_free.heads[static_cast<std::size_t>(h)].sa3b)) {
      c.pass = false;
      c.detail = "output codes differ at head " + std::to_string(h);
      return c;
    }
  }
  const std::int64_t extra = res_free.summary.sa_latency_cycles -
                             res_dsp.summary.sa_latency_cycles;
  const std::int64_t want = (2 - 1) * (toy.head_dim() + 3) + 4;
  if (extra != want) {
    c.pass = false;
    c.detail = "extra latency " + std::to_string(extra) + ", expected " +
               std::to_string(want);
  }
  return c;
}

}  // namespace

std::vector<Check> run_verify(const cli::RunConfig& cfg) {
  cfg.validate();
  std::vector<Check> checks;
  checks.push_back(check_comparator(cfg));
  checks.push_back(check_normq(cfg));
  checks.push_back(check_exp_monotone(cfg));
  checks.push_back(check_welford_real(cfg));
  checks.push_back(check_golden_vs_sim(cfg));
  checks.push_back(check_analytics_vs_trace(cfg));
  checks.push_back(check_dsp_free(cfg));
  return checks;
}

bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string report_text(const std::vector<Check>& checks) {
  std::ostringstream o;
  for (const auto& c : checks) {
    o << c.name << " = " << (c.pass ? "pass" : "fail");
    if (!c.detail.empty()) o << " (" << c.detail << ")";
    o << "\n";
  }
  return o.str();
}

}  // namespace vitsa::verify
