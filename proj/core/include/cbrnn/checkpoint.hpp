#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cbrnn/model.hpp"

namespace cbrnn {

/// Checkpoint layout, integers little-endian:
///   8 bytes "CBRNNCKP", u32 version
///   u32 length + text block of `key=value` lines (model config, then metadata
///   keys prefixed with "meta.")
///   u32 group count; per group: u32 name length, name, u64 count, f64 values
///   u32 batch-norm count; per state: u32 channels, u64 updates, f64 momentum,
///   f64 epsilon, f64 running means, f64 running variances
inline constexpr std::uint32_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

std::map<std::string, std::string> config_to_map(const CbrnnConfig& cfg);
CbrnnConfig config_from_map(const std::map<std::string, std::string>& kv);

std::map<std::string, std::string> feature_config_to_map(const FeatureConfig& cfg);
FeatureConfig feature_config_from_map(const std::map<std::string, std::string>& kv);

struct LoadedCheckpoint {
  CbrnnModel model;
  Metadata metadata;
};

std::vector<std::uint8_t> encode_checkpoint(const CbrnnModel& model, const Metadata& metadata = {});
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const CbrnnModel& model, const std::filesystem::path& path, const Metadata& metadata = {});
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cbrnn
