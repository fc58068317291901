#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cbrnn/features.hpp"

namespace cbrnn {

/// Binary layout, all integers little-endian:
///   8 bytes  magic "CBRNFEAT"
///   u32      format version
///   u32      clip id length, followed by the id bytes
///   3 x u32  MBE shape (time, feature, channel)
///   3 x u32  DomFreq shape (time, feature, channel)
///   f64[]    MBE payload, then DomFreq payload (IEEE-754 binary64)
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

std::vector<std::uint8_t> encode_feature_cache(const FeaturePair& pair);
FeaturePair decode_feature_cache(std::span<const std::uint8_t> bytes);

void write_feature_cache(const FeaturePair& pair, const std::filesystem::path& path);
FeaturePair read_feature_cache(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for content hashes in extraction reports.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace cbrnn
