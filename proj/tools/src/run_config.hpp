#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "cbrnn/augmentation.hpp"
#include "cbrnn/features.hpp"
#include "cbrnn/model.hpp"
#include "cbrnn/training.hpp"

namespace cbrnn::cli {

enum class Protocol { kDev, kChallenge };

std::string to_string(Protocol p);

struct Paths {
  std::filesystem::path manifest;
  std::filesystem::path audio_dir;
  std::filesystem::path cache_dir;
  std::filesystem::path out_dir;
  std::filesystem::path test_manifest;
};

/// Everything a command needs, resolved from defaults, an optional INI file
/// and command-line flags (in that order of precedence).
struct RunConfig {
  Paths paths;
  FeatureConfig features;
  CbrnnConfig model;
  /// False until the config file names any pooling schedule; otherwise the
  /// schedule is derived from the layer count and the cached input shape.
  bool explicit_pooling = false;
  TrainConfig train;
  AugmentOptions augment;
  Protocol protocol = Protocol::kDev;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// INI sections: [paths] [features] [model] [train] [augment] [run].
/// Unknown sections or keys are a ConfigError.
void apply_ini(RunConfig& cfg, const std::filesystem::path& path);
void write_ini(const RunConfig& cfg, const std::filesystem::path& path);

std::map<std::string, std::map<std::string, std::string>> to_sections(const RunConfig& cfg);

/// Fits the model's input dims (frames, mel bands, dom-freq width) to data,
/// re-deriving pooling unless it was set explicitly.
CbrnnConfig fit_model_to_input(const RunConfig& cfg, const FeaturePair& sample);

}  // namespace cbrnn::cli
