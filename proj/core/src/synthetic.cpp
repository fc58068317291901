#include "cbrnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace cbrnn {

AudioClip synthesize_clip(std::string id, bool bird_present, std::uint64_t seed, const SyntheticClipSpec& spec) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(spec.seconds * spec.sample_rate));
  AudioClip clip;
  clip.id = std::move(id);
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rms = between(spec.noise_rms_min, spec.noise_rms_max);
  for (auto& s : clip.samples) s = rms * gauss(rng);

  if (bird_present) {
    std::uniform_int_distribution<int> count(spec.bursts_min, spec.bursts_max);
    const int bursts = count(rng);
    for (int b = 0; b < bursts; ++b) {
      const double dur = between(spec.burst_seconds_min, spec.burst_seconds_max);
      const double start = between(0.0, spec.seconds - dur);
      const double f0 = between(spec.burst_hz_min, spec.burst_hz_max);
      const double f1 = std::clamp(f0 * between(0.8, 1.25), spec.burst_hz_min, spec.burst_hz_max);
      const double amp = between(spec.burst_amplitude_min, spec.burst_amplitude_max);
      const auto first = static_cast<std::size_t>(start * spec.sample_rate);
      const auto len = static_cast<std::size_t>(dur * spec.sample_rate);
      double phase = 0.0;
      for (std::size_t i = 0; i < len && first + i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(len);
        const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * frac);
        phase += 2.0 * std::numbers::pi * (f0 + (f1 - f0) * frac) / spec.sample_rate;
        clip.samples[first + i] += amp * env * std::sin(phase);
      }
    }
  }
  for (auto& s : clip.samples) s = std::clamp(s, -1.0, 1.0);
  return clip;
}

std::vector<SyntheticCorpusItem> synthesize_corpus(std::size_t count, std::uint64_t seed,
                                                   const SyntheticClipSpec& spec) {
  std::vector<SyntheticCorpusItem> out;
  out.reserve(count);
  const std::size_t positives = (count + 1) / 2;
  std::mt19937_64 seeds(seed);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "clip%04zu", i);
    const bool present = i < positives;
    out.push_back({synthesize_clip(id, present, seeds(), spec), present ? Label::kPresent : Label::kAbsent});
  }
  return out;
}

}  // namespace cbrnn
