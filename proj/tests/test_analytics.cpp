#include <cmath>

#include "doctest.h"
#include "vitsa/analytics.hpp"

using namespace vitsa;
using namespace vitsa::perf;

namespace {

TimingInputs deit(int embed, int heads) {
  TimingInputs t;
  t.dims = ModelDims{198, embed, heads, 4, 3};
  return t;
}

const TimingInputs kSmall = deit(192, 3);
const TimingInputs kBase = deit(384, 6);
const TimingInputs kLarge = deit(768, 12);

}  // namespace

TEST_CASE("single-head latency for the reference geometries") {
  CHECK(sa_latency(kBase) == 1327);
  CHECK(sa_latency(kSmall) == 1135);
  // term-by-term oracle at a different multiplier setting
  for (int mul : {1, 2, 4}) {
    TimingInputs t = kBase;
    t.mul_cycles = mul;
    const std::int64_t want = 384 + 3 * 64 + 64 * (mul + 1) + 3 * 198 +
                              5 * mul + 20 + t.exp_depth;
    CHECK(sa_latency(t) == want);
  }
  TimingInputs deep = kBase;
  deep.exp_depth = 10;
  CHECK(sa_latency(deep) == 1327 + 6);
}

TEST_CASE("weight traffic cycles scale with geometry and bus width") {
  CHECK(comm_cycles(kBase) == 3564);
  CHECK(comm_cycles(kSmall) == 1782);
  CHECK(comm_cycles(kLarge) == 7128);
  for (int bus : {8, 16, 32, 64, 128}) {
    TimingInputs t = kBase;
    t.bus_bits = bus;
    const double bits = 3.0 * 198 * 384;
    CHECK(comm_cycles(t) ==
          static_cast<std::int64_t>(std::ceil(bits / bus)));
  }
  TimingInputs inf = kBase;
  inf.bus_bits = 0;
  CHECK(comm_cycles(inf) == 0);
}

TEST_CASE("issue pitch is the max of three terms with the right binder") {
  const PitchReport p = pitch(kBase);
  CHECK(p.cycles == 594);
  CHECK(p.bound == PitchBound::Communication);
  CHECK(p.input_load == 582);
  CHECK(p.compute_drain == 460);
  CHECK(p.communication == 594);

  TimingInputs inf = kBase;
  inf.bus_bits = 0;
  const PitchReport pi = pitch(inf);
  CHECK(pi.cycles == 582);  // widening the bus bottoms out at input load
  CHECK(pi.bound == PitchBound::InputLoad);

  TimingInputs tall = kBase;
  tall.dims.n_tokens = 1000;
  tall.bus_bits = 0;
  CHECK(pitch(tall).bound == PitchBound::ComputeDrain);
  CHECK(pitch(tall).cycles == 64 + 2000);

  CHECK(std::string(pitch_bound_name(PitchBound::Communication)) ==
        "communication");
  CHECK(std::string(pitch_bound_name(PitchBound::InputLoad)) == "input_load");
  CHECK(std::string(pitch_bound_name(PitchBound::ComputeDrain)) ==
        "compute_drain");
}

TEST_CASE("pitch never increases with a wider bus or more heads") {
  std::int64_t prev = 1 << 30;
  for (int bus : {8, 16, 32, 64, 128, 256}) {
    TimingInputs t = kBase;
    t.bus_bits = bus;
    const std::int64_t c = pitch(t).cycles;
    CHECK(c <= prev);
    prev = c;
  }
  prev = 1 << 30;
  for (int heads : {1, 2, 3, 6}) {
    TimingInputs t = kBase;
    t.dims.heads = heads;  // head_dim grows, but traffic splits across heads
    t.dims.embed_dim = 384;
    const std::int64_t c = pitch(t).communication;
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("msa latency composes pitch, latency, and double traffic") {
  CHECK(msa_latency(kBase) == 11425);
  // independent composition oracle
  CHECK(msa_latency(kBase) ==
        sa_latency(kBase) + (6 - 1) * pitch(kBase).cycles +
            2 * comm_cycles(kBase));
  CHECK(static_cast<double>(msa_latency(kBase)) * kBase.clock_ns / 1000.0 ==
        doctest::Approx(28.5625));

  TimingInputs narrow = kBase;
  narrow.bus_bits = 1;  // traffic can no longer hide under the compute span
  CHECK_THROWS_AS(msa_latency(narrow), ConfigError);
}

TEST_CASE("full model latency matches the reference breakdown") {
  const AnalyticReport r = full_model_latency(kBase, 12);
  CHECK(r.sa_latency_cycles == 1327);
  CHECK(r.comm_cycles == 3564);
  CHECK(r.pitch_cycles == 594);
  CHECK(r.msa_latency_cycles == 11425);
  // layer = 4 * traffic + pipelined SA + projection + MLP
  const std::int64_t sa_pipelined = 1327 + 5 * (3564 / 6);
  CHECK(sa_pipelined == 4297);
  const std::int64_t projection = 2 * 384 + 198;
  CHECK(projection == 966);
  const std::int64_t mlp = (4 + 2) * 384 + 198;
  CHECK(mlp == 2502);
  CHECK(r.layer_cycles == 4 * 3564 + sa_pipelined + projection + mlp);
  CHECK(r.layer_cycles == 22021);
  CHECK(r.model_cycles == 264252);
  CHECK(r.latency_us == doctest::Approx(660.63));
  CHECK(r.tokens_per_s == doctest::Approx(1e9 / 2.5 / 594.0));
  CHECK(std::floor(r.tokens_per_s) == 673400.0);
  CHECK(r.bandwidth_GBps == doctest::Approx(3.125));

  const AnalyticReport small = full_model_latency(kSmall, 12);
  CHECK((4 + 2) * 192 + 198 == 1350);  // MLP term of the small geometry
  CHECK(small.layer_cycles - 4 * small.comm_cycles -
            (small.sa_latency_cycles + 2 * (small.comm_cycles / 3)) -
            (2 * 192 + 198) ==
        1350);
  CHECK_THROWS_AS(full_model_latency(kBase, 0), ConfigError);
}

TEST_CASE("model cycles are linear in the layer count") {
  for (int layers : {1, 2, 7, 24}) {
    const AnalyticReport r = full_model_latency(kBase, layers);
    CHECK(r.model_cycles == static_cast<std::int64_t>(layers) * r.layer_cycles);
  }
}

TEST_CASE("bandwidth and operational intensity") {
  CHECK(bandwidth_gbps(kBase) == doctest::Approx(3.125));
  TimingInputs wide = kBase;
  wide.bus_bits = 128;
  CHECK(bandwidth_gbps(wide) == doctest::Approx(6.25));
  CHECK(op_per_byte(13568.0, 3.125) == doctest::Approx(4341.76));
  CHECK(op_per_byte(0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(op_per_byte(1.0, 0.0), ConfigError);
}

TEST_CASE("normalized power is quadratic in bit width") {
  CHECK(normalized_power(1.0, 3) == doctest::Approx(0.140625));
  CHECK(normalized_power(1.0, 8) == doctest::Approx(1.0));
  CHECK(normalized_power(2.0, 8) / normalized_power(2.0, 4) ==
        doctest::Approx(4.0));
  CHECK_THROWS_AS(normalized_power(-1.0, 8), ConfigError);
  CHECK_THROWS_AS(normalized_power(1.0, 0), ConfigError);
}

TEST_CASE("dennard normalization identity, scaling, and composition") {
  const DennardPair id = dennard_normalize(10.0, 5.0, 1.0);
  CHECK(id.throughput == 10.0);
  CHECK(id.power_eff == 5.0);
  const DennardPair half = dennard_normalize(10.0, 5.0, 2.0);
  CHECK(half.throughput == doctest::Approx(2.5));
  CHECK(half.power_eff == doctest::Approx(2.5));
  const DennardPair ab =
      dennard_normalize(dennard_normalize(8.0, 4.0, 2.0).throughput,
                        dennard_normalize(8.0, 4.0, 2.0).power_eff, 3.0);
  const DennardPair direct = dennard_normalize(8.0, 4.0, 6.0);
  CHECK(ab.throughput == doctest::Approx(direct.throughput));
  CHECK(ab.power_eff == doctest::Approx(direct.power_eff));
  CHECK_THROWS_AS(dennard_normalize(1.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("roofline point saturates at the compute peak") {
  const double bw = bandwidth_gbps(kBase);
  CHECK(roofline_point(kBase, 0.0, 100.0) == 0.0);
  CHECK(roofline_point(kBase, 1.0, 100.0) == doctest::Approx(bw));
  CHECK(roofline_point(kBase, 1e9, 100.0) == doctest::Approx(100.0));
  CHECK_THROWS_AS(roofline_point(kBase, -1.0, 1.0), ConfigError);
}

TEST_CASE("dsp-free overhead depends on head width only") {
  CHECK(dsp_free_extra_cycles(kBase, 2) == 71);
  CHECK(dsp_free_extra_cycles(kSmall, 2) == 71);  // same 64-wide heads
  for (int heads : {1, 2, 4, 8}) {
    TimingInputs t;
    t.dims = ModelDims{100, 64 * heads, heads, 4, 3};
    CHECK(dsp_free_extra_cycles(t, 3) == 2 * (64 + 3) + 4);
  }
  CHECK_THROWS_AS(dsp_free_extra_cycles(kBase, 1), ConfigError);
}

TEST_CASE("timing input validation") {
  TimingInputs t = kBase;
  t.mul_cycles = 0;
  CHECK_THROWS_AS(sa_latency(t), ConfigError);
  t = kBase;
  t.bus_bits = -1;
  CHECK_THROWS_AS(comm_cycles(t), ConfigError);
  t = kBase;
  t.clock_ns = 0.0;
  CHECK_THROWS_AS(pitch(t), ConfigError);
  t = kBase;
  t.exp_depth = 0;
  CHECK_THROWS_AS(sa_latency(t), ConfigError);
  t = kBase;
  t.dims.embed_dim = 383;  // not divisible by heads
  CHECK_THROWS_AS(sa_latency(t), ConfigError);
}
