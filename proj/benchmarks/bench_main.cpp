#include <benchmark/benchmark.h>

#include <vector>

#include "lqe/config.hpp"
#include "lqe/imageqc.hpp"
#include "lqe/metrics.hpp"
#include "lqe/model.hpp"
#include "lqe/ordinal.hpp"
#include "lqe/synthetic.hpp"
#include "lqe/trainer.hpp"

namespace {

lqe::Image sample_image(int side) {
  lqe::SyntheticSpec spec;
  spec.side = side;
  lqe::Rng rng(3);
  return lqe::render_synthetic(spec, 6, rng);
}

void BM_ModelForward(benchmark::State& state) {
  lqe::TrainConfig cfg;
  cfg.input_side = static_cast<int>(state.range(0));
  lqe::ParamSet params;
  const lqe::Model model(cfg.model_config(), params);
  model.initialize(params, 1);
  const lqe::Image img = sample_image(cfg.input_side);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(img, params));
}
BENCHMARK(BM_ModelForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  lqe::TrainConfig cfg;
  cfg.input_side = 128;
  cfg.batch_size = static_cast<int>(state.range(0));
  lqe::ParamSet params;
  const lqe::Model model(cfg.model_config(), params);
  model.initialize(params, 1);
  std::vector<lqe::LabeledImage> items;
  lqe::SyntheticSpec spec;
  lqe::Rng rng(5);
  for (int i = 0; i < cfg.batch_size; ++i) {
    lqe::LabeledImage item;
    item.grade = i % cfg.num_classes;
    item.image = lqe::render_synthetic(spec, 2 * item.grade, rng);
    items.push_back(std::move(item));
  }
  const auto batch = lqe::plain_batch(items, cfg.num_classes);
  lqe::Gradients grads = params.zeros_like();
  lqe::Workspace ws;
  for (auto _ : state) {
    for (auto& g : grads) g.fill(0.0);
    benchmark::DoNotOptimize(lqe::forward_backward(model, params, batch, cfg, 3.0, &grads, nullptr, &ws));
  }
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_QcGate(benchmark::State& state) {
  const lqe::Image img = sample_image(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lqe::qc_gate(img));
}
BENCHMARK(BM_QcGate)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_Decode(benchmark::State& state) {
  lqe::Rng rng(9);
  std::vector<double> pi(static_cast<std::size_t>(state.range(0)));
  for (double& v : pi) v = rng.uniform(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(lqe::decode(pi));
}
BENCHMARK(BM_Decode)->Arg(4)->Arg(64);

void BM_Qwk(benchmark::State& state) {
  lqe::ConfusionMatrix cm(5);
  lqe::Rng rng(4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) cm.add(i, j, rng.uniform_int(0, 50));
  for (auto _ : state) benchmark::DoNotOptimize(lqe::quadratic_weighted_kappa(cm));
}
BENCHMARK(BM_Qwk);

}  // namespace

BENCHMARK_MAIN();
