#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cbrnn/features.hpp"
#include "cbrnn/model.hpp"

namespace cbrnn::testing_support {

/// Scaled-down network: 20 frames, 8 mel bands, 3 dom-freq slots.
inline CbrnnConfig tiny_config() {
  CbrnnConfig cfg;
  cfg.frames = 20;
  cfg.mbe_bands = 8;
  cfg.domfreq_width = 3;
  cfg.n_filters = 3;
  cfg.pool_time = {2, 2};
  cfg.pool_freq_mbe = {4, 2};
  cfg.pool_freq_domfreq = {3, 1};
  cfg.rnn_units = 4;
  cfg.fc_units = 4;
  cfg.dropout = 0.0;
  return cfg;
}

inline FeaturePair random_pair(const CbrnnConfig& cfg, std::uint64_t seed, std::string id = "x") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FeaturePair p;
  p.clip_id = std::move(id);
  p.mbe = Tensor(cfg.frames, cfg.mbe_bands, 1);
  p.domfreq = Tensor(cfg.frames, cfg.domfreq_width, 2);
  for (auto& v : p.mbe.storage()) v = n(rng);
  for (auto& v : p.domfreq.storage()) v = n(rng);
  return p;
}

/// Pair whose mel energies carry a class-dependent offset in the upper bands.
inline FeaturePair class_pair(const CbrnnConfig& cfg, bool present, std::uint64_t seed, std::string id) {
  FeaturePair p = random_pair(cfg, seed, std::move(id));
  if (present) {
    for (std::size_t t = 0; t < cfg.frames; ++t)
      for (std::size_t f = cfg.mbe_bands / 2; f < cfg.mbe_bands; ++f) p.mbe(t, f) += 2.0;
    for (std::size_t t = 0; t < cfg.frames; ++t) p.domfreq(t, 0, 1) += 1.5;
  }
  return p;
}

}  // namespace cbrnn::testing_support
