#include "cbrnn/augmentation.hpp"

#include <algorithm>
#include <fstream>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

void require_label(const LabeledSample& s) {
  if (s.label == Label::kUnknown) {
    throw Error("augmentation requires labels; '" + s.features.clip_id + "' is unlabeled");
  }
}

std::size_t draw_other(std::size_t self, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t j = pick(rng);
  return j >= self ? j + 1 : j;
}

}  // namespace

std::string to_string(Origin o) {
  switch (o) {
    case Origin::kOriginal: return "original";
    case Origin::kBlocksMixed: return "blocks_mixed";
    case Origin::kTestMixed: return "test_mixed";
  }
  return "original";
}

FeaturePair mix_features(const FeaturePair& a, const FeaturePair& b) {
  if (!a.mbe.same_shape(b.mbe)) {
    throw ShapeError("mix: MBE shapes " + a.mbe.shape_string() + " and " + b.mbe.shape_string() + " differ");
  }
  if (a.domfreq.time() != b.domfreq.time() || a.domfreq.channel() != b.domfreq.channel()) {
    throw ShapeError("mix: dom-freq shapes " + a.domfreq.shape_string() + " and " + b.domfreq.shape_string() +
                     " are incompatible");
  }
  FeaturePair out;
  out.clip_id = a.clip_id + "+" + b.clip_id;
  out.mbe = a.mbe;
  for (std::size_t i = 0; i < out.mbe.size(); ++i) {
    out.mbe.storage()[i] = std::max(a.mbe.storage()[i], b.mbe.storage()[i]);
  }
  const std::size_t T = a.domfreq.time(), ka = a.domfreq.feature(), kb = b.domfreq.feature();
  const std::size_t C = a.domfreq.channel();
  out.domfreq = Tensor(T, ka + kb, C);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < ka; ++k) out.domfreq(t, k, c) = a.domfreq(t, k, c);
      for (std::size_t k = 0; k < kb; ++k) out.domfreq(t, ka + k, c) = b.domfreq(t, k, c);
    }
  }
  return out;
}

LabeledSample blocks_mix(const LabeledSample& a, const LabeledSample& b) {
  require_label(a);
  require_label(b);
  LabeledSample out;
  out.features = mix_features(a.features, b.features);
  out.label = (a.label == Label::kAbsent && b.label == Label::kAbsent) ? Label::kAbsent : Label::kPresent;
  out.provenance = {Origin::kBlocksMixed, a.features.clip_id, b.features.clip_id};
  return out;
}

std::vector<LabeledSample> augment_blocks(std::span<const LabeledSample> train, std::mt19937_64& rng) {
  if (train.size() < 2) throw Error("blocks mixing needs at least 2 training samples");
  for (const auto& s : train) require_label(s);
  std::vector<std::size_t> partner(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) partner[i] = draw_other(i, train.size(), rng);
  std::vector<LabeledSample> out(train.begin(), train.end());
  out.reserve(2 * train.size());
  for (std::size_t i = 0; i < train.size(); ++i) out.push_back(blocks_mix(train[i], train[partner[i]]));
  return out;
}

std::vector<LabeledSample> adapt_test_mixing(std::span<const LabeledSample> train,
                                             std::span<const FeaturePair> test_features, std::mt19937_64& rng) {
  if (test_features.empty()) throw Error("test mixing needs at least one test clip");
  for (const auto& s : train) require_label(s);
  std::vector<LabeledSample> out(train.begin(), train.end());
  std::uniform_int_distribution<std::size_t> pick(0, test_features.size() - 1);
  std::size_t positives = 0;
  for (const auto& s : train) {
    if (s.label != Label::kPresent) continue;
    ++positives;
    const FeaturePair& t = test_features[pick(rng)];
    LabeledSample mixed;
    mixed.features = mix_features(s.features, t);
    mixed.label = Label::kPresent;
    mixed.provenance = {Origin::kTestMixed, s.features.clip_id, t.clip_id};
    out.push_back(std::move(mixed));
  }
  if (positives == 0) throw Error("test mixing needs at least one positive training sample");
  return out;
}

std::vector<LabeledSample> augment_training_set(std::span<const LabeledSample> train,
                                                std::span<const FeaturePair> test_features,
                                                const AugmentOptions& options, std::mt19937_64& rng) {
  if (options.blocks_mixing && options.test_mixing && !options.allow_combined) {
    throw ConfigError("blocks mixing and test mixing together require an explicit override");
  }
  std::vector<LabeledSample> out(train.begin(), train.end());
  if (options.blocks_mixing) {
    auto blocks = augment_blocks(train, rng);
    out.insert(out.end(), std::make_move_iterator(blocks.begin() + static_cast<std::ptrdiff_t>(train.size())),
               std::make_move_iterator(blocks.end()));
  }
  if (options.test_mixing) {
    auto mixed = adapt_test_mixing(train, test_features, rng);
    out.insert(out.end(), std::make_move_iterator(mixed.begin() + static_cast<std::ptrdiff_t>(train.size())),
               std::make_move_iterator(mixed.end()));
  }
  if (options.blocks_mixing || options.test_mixing) harmonize_domfreq_width(out);
  return out;
}

FeaturePair promote_domfreq_width(const FeaturePair& pair, std::size_t width) {
  const std::size_t k = pair.domfreq.feature();
  if (k == width) return pair;
  if (k == 0 || width < k || width % k != 0) {
    throw ShapeError("cannot promote dom-freq width " + std::to_string(k) + " to " + std::to_string(width));
  }
  FeaturePair out = pair;
  out.domfreq = Tensor(pair.domfreq.time(), width, pair.domfreq.channel());
  for (std::size_t t = 0; t < pair.domfreq.time(); ++t) {
    for (std::size_t s = 0; s < width; ++s) {
      for (std::size_t c = 0; c < pair.domfreq.channel(); ++c) out.domfreq(t, s, c) = pair.domfreq(t, s % k, c);
    }
  }
  return out;
}

std::size_t harmonize_domfreq_width(std::vector<LabeledSample>& samples) {
  std::size_t width = 0;
  for (const auto& s : samples) width = std::max(width, s.features.domfreq.feature());
  for (auto& s : samples) {
    if (s.features.domfreq.feature() != width) s.features = promote_domfreq_width(s.features, width);
  }
  return width;
}

void write_provenance_csv(const std::filesystem::path& path, std::span<const LabeledSample> samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "sample_id,label,origin,source_a,source_b\n";
  for (const auto& s : samples) {
    out << s.features.clip_id << ',' << static_cast<int>(s.label) << ',' << to_string(s.provenance.origin) << ','
        << s.provenance.source_a << ',' << s.provenance.source_b << '\n';
  }
}

}  // namespace cbrnn
