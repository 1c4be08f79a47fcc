#include <benchmark/benchmark.h>

#include <random>

#include "vitsa/msa.hpp"
#include "vitsa/systolic.hpp"
#include "vitsa/welford.hpp"

using namespace vitsa;

namespace {

model::IntMat random_codes(int rows, int cols, std::uint64_t seed) {
  model::IntMat m(rows, cols);
  std::mt19937_64 rng(seed);
  for (auto& v : m.v) v = static_cast<std::int64_t>(rng() % 15) - 7;
  return m;
}

void bm_mac_array_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const model::IntMat x = random_codes(n, 64, 1);
  const model::IntMat w = random_codes(64, 64, 2);
  sim::MacArray arr(64, 64, 32);
  arr.set_weights(w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::array_matmul(arr, x));
  }
  state.SetItemsProcessed(state.iterations() * n * 64 * 64);
}
BENCHMARK(bm_mac_array_matmul)->Arg(32)->Arg(198);

void bm_exp_approx(benchmark::State& state) {
  const quant::FixedPointParams fp;
  std::int64_t x = -8 * fp.exp_prescale;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quant::exp_approx(x, fp));
    if (++x > 0) x = -8 * fp.exp_prescale;
  }
}
BENCHMARK(bm_exp_approx);

void bm_ln_quant_row(benchmark::State& state) {
  const model::ModelDims dims{8, 12, 3, 4, 3};
  const auto syn = model::make_synthetic(dims, quant::FixedPointParams{}, 1);
  const auto proj = model::qkv_project(syn.z3b, syn.params, 0);
  const auto& hp = syn.params.head[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::layernorm_quantize_rows(
        proj.q_acc, hp.q_scale_fix, hp.q_bias, hp.q_normq, syn.params));
  }
}
BENCHMARK(bm_ln_quant_row);

void bm_welford_fixed(benchmark::State& state) {
  const quant::FixedPointParams fp;
  const auto recip = quant::reciprocal_table(fp.nu_exp, 64);
  std::mt19937_64 rng(3);
  std::vector<std::int64_t> xs(64);
  for (auto& v : xs) v = static_cast<std::int64_t>(rng() % 201) - 100;
  for (auto _ : state) {
    quant::WelfordFixedState st;
    for (std::int64_t v : xs) st = quant::welford_update_fixed(st, v, fp, recip);
    benchmark::DoNotOptimize(st);
  }
}
BENCHMARK(bm_welford_fixed);

void bm_toy_msa_sim(benchmark::State& state) {
  const model::ModelDims dims{8, 12, 3, 4, 3};
  const auto syn = model::make_synthetic(dims, quant::FixedPointParams{}, 1);
  const auto acc =
      sim::Accelerator::build_sa_pipeline(dims, sim::ArrayConfig{}, syn.params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(acc.run_msa(syn.z3b));
  }
}
BENCHMARK(bm_toy_msa_sim);

}  // namespace

BENCHMARK_MAIN();
