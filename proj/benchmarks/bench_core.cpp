// Microbenchmarks for the hot paths: convolution forward/backward, a full
// model forward, and the wafer generator.

#include <benchmark/benchmark.h>

#include "waferseg/model.hpp"
#include "waferseg/ops.hpp"
#include "waferseg/rng.hpp"
#include "waferseg/wafergen.hpp"

using namespace waferseg;

namespace {
Tensor random_tensor(Shape4 s, uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
  return t;
}
}  // namespace

static void BM_ConvForward(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  Var x = constant(random_tensor({1, c, hw, hw}, 1));
  Var w = constant(random_tensor({c, c, 3, 3}, 2));
  Var b = constant(random_tensor({c, 1, 1, 1}, 3));
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1));
  state.SetItemsProcessed(state.iterations());
  state.counters["GFLOP"] = 2.0 * c * c * 9 * hw * hw * 1e-9;
}
BENCHMARK(BM_ConvForward)->Args({64, 56})->Args({128, 28})->Args({256, 14});

static void BM_ConvBackward(benchmark::State& state) {
  const int c = int(state.range(0)), hw = int(state.range(1));
  Var x = make_var(random_tensor({1, c, hw, hw}, 1), true);
  Var w = make_var(random_tensor({c, c, 3, 3}, 2), true);
  Var b = make_var(random_tensor({c, 1, 1, 1}, 3), true);
  for (auto _ : state) {
    Var y = conv2d(x, w, b, 1);
    y->ensure_grad().fill(1.0);
    y->backprop(*y);
    x->zero_grad();
    w->zero_grad();
    b->zero_grad();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ConvBackward)->Args({64, 56})->Args({128, 28});

static void BM_ModelForward(benchmark::State& state) {
  ModelConfig mc;
  mc.variant = state.range(0) == 0 ? Variant::vaughan : Variant::broomstick;
  if (mc.variant == Variant::broomstick) mc.skipCount = 4;
  Model m = Model::build(mc, 1);
  Tensor img = random_tensor({1, 1, 112, 112}, 5);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(img, false));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1);

static void BM_GenerateWafer(benchmark::State& state) {
  WaferGenConfig cfg;
  cfg.clusterCount = 1;
  uint64_t seed = 0;
  for (auto _ : state) {
    cfg.seed = ++seed;
    benchmark::DoNotOptimize(generate_wafer(cfg));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GenerateWafer);

BENCHMARK_MAIN();
