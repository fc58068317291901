#include <benchmark/benchmark.h>

#include "cbrnn/features.hpp"
#include "cbrnn/feature_cache.hpp"
#include "cbrnn/synthetic.hpp"

namespace {

const cbrnn::AudioClip& bird_clip() {
  static const cbrnn::AudioClip clip = cbrnn::synthesize_clip("bench", true, 42);
  return clip;
}

void BM_FrameSignal(benchmark::State& state) {
  const cbrnn::FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(cbrnn::frame_signal(bird_clip(), cfg));
}
BENCHMARK(BM_FrameSignal)->Unit(benchmark::kMillisecond);

void BM_StftMagnitude(benchmark::State& state) {
  const cbrnn::FeatureConfig cfg;
  const auto frames = cbrnn::frame_signal(bird_clip(), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(cbrnn::stft_magnitude(frames, cfg));
}
BENCHMARK(BM_StftMagnitude)->Unit(benchmark::kMillisecond);

void BM_LogMel(benchmark::State& state) {
  const cbrnn::FeatureConfig cfg;
  const auto spec = cbrnn::stft_magnitude(cbrnn::frame_signal(bird_clip(), cfg), cfg);
  const auto fb = cbrnn::mel_filterbank(cfg, bird_clip().sample_rate);
  for (auto _ : state) benchmark::DoNotOptimize(cbrnn::log_mel_energies(spec, fb));
}
BENCHMARK(BM_LogMel)->Unit(benchmark::kMillisecond);

void BM_DominantFrequencies(benchmark::State& state) {
  const cbrnn::FeatureConfig cfg;
  const auto spec = cbrnn::stft_magnitude(cbrnn::frame_signal(bird_clip(), cfg), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(cbrnn::dominant_frequencies(spec, cfg, bird_clip().sample_rate));
}
BENCHMARK(BM_DominantFrequencies)->Unit(benchmark::kMillisecond);

void BM_ExtractFeatures(benchmark::State& state) {
  cbrnn::FeatureConfig cfg;
  cfg.band_limited = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(cbrnn::extract_features(bird_clip(), cfg));
}
BENCHMARK(BM_ExtractFeatures)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FeatureCacheRoundTrip(benchmark::State& state) {
  const auto pair = cbrnn::extract_features(bird_clip(), {});
  for (auto _ : state) {
    const auto bytes = cbrnn::encode_feature_cache(pair);
    benchmark::DoNotOptimize(cbrnn::decode_feature_cache(bytes));
  }
}
BENCHMARK(BM_FeatureCacheRoundTrip)->Unit(benchmark::kMicrosecond);

}  // namespace
