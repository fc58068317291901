#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbrnn/audio.hpp"

namespace cbrnn {

struct SyntheticClipSpec {
  int sample_rate = kChallengeSampleRate;
  double seconds = kClipSeconds;
  /// Background noise RMS range; each clip draws its own level.
  double noise_rms_min = 0.01;
  double noise_rms_max = 0.05;
  /// Tone bursts for positive clips.
  int bursts_min = 3;
  int bursts_max = 8;
  double burst_seconds_min = 0.1;
  double burst_seconds_max = 0.4;
  double burst_hz_min = 2000.0;
  double burst_hz_max = 7000.0;
  double burst_amplitude_min = 0.05;
  double burst_amplitude_max = 0.2;
};

/// Noise-only clip, or noise plus Hann-enveloped chirping tone bursts when
/// `bird_present`. Deterministic in `seed`.
AudioClip synthesize_clip(std::string id, bool bird_present, std::uint64_t seed,
                          const SyntheticClipSpec& spec = {});

struct SyntheticCorpusItem {
  AudioClip clip;
  Label label;
};

/// `count` clips, the first half positive (rounded up), ids "clip0000"...
std::vector<SyntheticCorpusItem> synthesize_corpus(std::size_t count, std::uint64_t seed,
                                                   const SyntheticClipSpec& spec = {});

}  // namespace cbrnn
