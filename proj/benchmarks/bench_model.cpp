#include "emaattn/model.hpp"
#include "emaattn/numkit.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace emaattn;

namespace {

constexpr int kFeatures = 12;

struct Instance {
  Matrix x;
  Mask mask;
  ModelParams params;
};

Instance make_instance(Variant variant, int t) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance in;
  in.x = Matrix::NullaryExpr(kFeatures, t, [&] { return unit(rng); });
  in.mask.assign(static_cast<std::size_t>(t), true);
  ModelShape shape;
  shape.variant = variant;
  shape.v = kFeatures;
  in.params = random_params(shape, 7, 0.3);
  return in;
}

void BM_MaskedSoftmax(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  const Matrix logits = Matrix::NullaryExpr(t, t, [&] { return normal(rng); });
  Mask mask(static_cast<std::size_t>(t), true);
  for (int j = t - t / 4; j < t; ++j) mask[static_cast<std::size_t>(j)] = false;
  for (auto _ : state) benchmark::DoNotOptimize(masked_softmax_rows(logits, mask));
  state.SetComplexityN(t);
}
BENCHMARK(BM_MaskedSoftmax)->RangeMultiplier(2)->Range(32, 256)->Complexity();

void BM_Forward(benchmark::State& state, Variant variant) {
  const Instance in = make_instance(variant, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward(in.params, in.x, in.mask));
}
BENCHMARK_CAPTURE(BM_Forward, dual, Variant::dual)->Arg(64)->Arg(156);
BENCHMARK_CAPTURE(BM_Forward, temporal_only, Variant::temporal_only)->Arg(64)->Arg(156);

void BM_LossAndGrads(benchmark::State& state, Variant variant) {
  const Instance in = make_instance(variant, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(in.params, in.x, in.mask, 1, 1.0));
}
BENCHMARK_CAPTURE(BM_LossAndGrads, dual, Variant::dual)->Arg(64)->Arg(156);
BENCHMARK_CAPTURE(BM_LossAndGrads, temporal_only, Variant::temporal_only)->Arg(64)->Arg(156);
BENCHMARK_CAPTURE(BM_LossAndGrads, recurrent_baseline, Variant::recurrent_baseline)->Arg(64)->Arg(156);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> params(n, 0.1), grads(n, 0.01);
  AdamState adam(n);
  for (auto _ : state) {
    adam_step(params, grads, adam);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
