#include <benchmark/benchmark.h>

#include <random>

#include "cbrnn/model.hpp"
#include "cbrnn/training.hpp"

namespace {

std::vector<cbrnn::FeaturePair> random_batch(const cbrnn::CbrnnConfig& cfg, std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  std::vector<cbrnn::FeaturePair> out(n);
  for (auto& p : out) {
    p.mbe = cbrnn::Tensor(cfg.frames, cfg.mbe_bands, 1);
    p.domfreq = cbrnn::Tensor(cfg.frames, cfg.domfreq_width, 2);
    for (auto& v : p.mbe.storage()) v = d(rng);
    for (auto& v : p.domfreq.storage()) v = d(rng);
  }
  return out;
}

void BM_Predict(benchmark::State& state) {
  const cbrnn::CbrnnConfig cfg;
  cbrnn::CbrnnModel model(cfg, 1);
  const auto batch = random_batch(cfg, 2);
  {
    // batch norm needs running statistics before inference
    std::vector<const cbrnn::FeaturePair*> ptrs{&batch[0], &batch[1]};
    std::mt19937_64 rng(5);
    cbrnn::CbrnnModel::Trace trace;
    model.forward_train(ptrs, rng, trace);
  }
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(batch.front()));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const cbrnn::CbrnnConfig cfg;
  cbrnn::CbrnnModel model(cfg, 1);
  const auto batch = random_batch(cfg, static_cast<std::size_t>(state.range(0)));
  std::vector<const cbrnn::FeaturePair*> ptrs;
  for (const auto& p : batch) ptrs.push_back(&p);
  std::vector<double> labels(batch.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(i % 2);
  std::mt19937_64 rng(5);
  for (auto _ : state) {
    cbrnn::CbrnnModel::Trace trace;
    const auto probs = model.forward_train(ptrs, rng, trace);
    const auto loss = cbrnn::mse_loss(probs, labels);
    benchmark::DoNotOptimize(model.backward(trace, loss.gradient));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
