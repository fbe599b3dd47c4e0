#include <benchmark/benchmark.h>

#include "wgpinn/gradengine.hpp"
#include "wgpinn/lossbuilder.hpp"

namespace {

using namespace wgpinn;

NetworkParams network(std::size_t hidden, std::size_t width) {
  SeededRng rng(11);
  return init_params(rng, make_layer_sizes(hidden, width), 2.0);
}

void BM_JetForwardBatch(benchmark::State& state) {
  const ProblemSpec spec;
  const NetworkParams p = network(static_cast<std::size_t>(state.range(0)), 45);
  const Matrix pts = cell_center_grid(spec, 120, 10);
  for (auto _ : state) benchmark::DoNotOptimize(jet_forward_batch(p, pts));
  state.SetItemsProcessed(state.iterations() * pts.cols());
}
BENCHMARK(BM_JetForwardBatch)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_LossWithGradient(benchmark::State& state) {
  ProblemSpec spec;
  spec.formulation = state.range(0) == 0 ? Formulation::kClassical : Formulation::kTaper;
  const TrainingSet ts = build_training_set(spec, 60, 10, 40);
  const DtNContext ctx(spec, 40);
  const NetworkParams p = network(4, 30);
  SeededRng rng(11);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossAssembler loss(spec, ts, ctx);
  for (auto _ : state) benchmark::DoNotOptimize(loss.evaluate(p, sa, true));
}
BENCHMARK(BM_LossWithGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DtNApply(benchmark::State& state) {
  const ProblemSpec spec;
  const auto n = static_cast<std::size_t>(state.range(0));
  const DtNContext ctx(spec, n);
  std::vector<Complex> trace(n, Complex(1.0, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(ctx.apply(trace));
}
BENCHMARK(BM_DtNApply)->Arg(40)->Arg(80);

}  // namespace
BENCHMARK_MAIN();
