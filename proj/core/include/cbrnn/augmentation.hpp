#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cbrnn/audio.hpp"
#include "cbrnn/features.hpp"

namespace cbrnn {

enum class Origin { kOriginal, kBlocksMixed, kTestMixed };

std::string to_string(Origin o);

struct Provenance {
  Origin origin = Origin::kOriginal;
  /// For mixed samples: the training clip, then its partner (training or test clip).
  std::string source_a;
  std::string source_b;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LabeledSample {
  FeaturePair features;
  Label label = Label::kUnknown;
  Provenance provenance;
};

/// MBE: elementwise max. DomFreq: slot concatenation (a's slots first).
FeaturePair mix_features(const FeaturePair& a, const FeaturePair& b);

/// Label is absent only when both parents are absent.
LabeledSample blocks_mix(const LabeledSample& a, const LabeledSample& b);

/// Originals followed by one mixed sample per original, partner drawn
/// uniformly from the other samples.
std::vector<LabeledSample> augment_blocks(std::span<const LabeledSample> train, std::mt19937_64& rng);

/// Originals followed by one mix of each positive original with a uniformly
/// drawn test clip. Mixed samples are always labeled present.
std::vector<LabeledSample> adapt_test_mixing(std::span<const LabeledSample> train,
                                             std::span<const FeaturePair> test_features, std::mt19937_64& rng);

struct AugmentOptions {
  bool blocks_mixing = false;
  bool test_mixing = false;
  /// Both at once is rejected unless explicitly allowed.
  bool allow_combined = false;
};

/// Applies the enabled schemes to the originals and harmonizes dom-freq width.
std::vector<LabeledSample> augment_training_set(std::span<const LabeledSample> train,
                                                std::span<const FeaturePair> test_features,
                                                const AugmentOptions& options, std::mt19937_64& rng);

/// Repeats the slot block until the dom-freq width reaches `width`.
FeaturePair promote_domfreq_width(const FeaturePair& pair, std::size_t width);

/// Promotes every sample to the widest dom-freq width present. Returns that width.
std::size_t harmonize_domfreq_width(std::vector<LabeledSample>& samples);

void write_provenance_csv(const std::filesystem::path& path, std::span<const LabeledSample> samples);

}  // namespace cbrnn
