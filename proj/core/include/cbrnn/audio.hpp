#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbrnn {

inline constexpr int kChallengeSampleRate = 44100;
inline constexpr double kClipSeconds = 10.0;

/// Mono PCM recording with amplitudes in [-1, 1].
struct AudioClip {
  std::string id;
  int sample_rate = 0;
  std::vector<double> samples;

  /// Throws DecodeError if the clip violates its invariants.
  void validate() const;
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class SampleEncoding { kPcm8, kPcm16, kPcm24, kPcm32, kFloat32 };

/// Reads a RIFF/WAVE file. Integer PCM is scaled by 2^(bits-1) so the most
/// negative code maps to -1; multichannel input is averaged to mono.
AudioClip decode_wav(const std::filesystem::path& path);
AudioClip decode_wav_bytes(std::span<const std::uint8_t> bytes, std::string id);

/// Interleaved frames, one row per channel group. Used by the synthetic
/// corpus generator and by tests.
std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved, int channels,
                                     int sample_rate, SampleEncoding encoding);
void write_wav(const std::filesystem::path& path, std::span<const double> interleaved,
               int channels, int sample_rate,
               SampleEncoding encoding = SampleEncoding::kPcm16);

/// Zero-pads or truncates to exactly `seconds` of audio and rejects any rate
/// other than `required_rate`.
AudioClip conform_clip(AudioClip clip, int required_rate = kChallengeSampleRate,
                       double seconds = kClipSeconds);

enum class Label : std::int8_t { kAbsent = 0, kPresent = 1, kUnknown = -1 };

struct ManifestEntry {
  std::string clip_id;
  Label label = Label::kUnknown;
  std::filesystem::path path;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool fully_labeled() const;
  const ManifestEntry* find(const std::string& clip_id) const;
};

/// Parses an `itemid[,hasbird]` CSV. Audio paths resolve to
/// `<audio_dir>/<itemid>.wav`; a missing file is an error unless
/// `require_audio` is false.
Manifest load_manifest(const std::filesystem::path& csv_path,
                       const std::filesystem::path& audio_dir, bool require_audio = true);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& audio_dir,
                        bool require_audio = true);
void write_manifest(const std::filesystem::path& csv_path, const Manifest& manifest);

}  // namespace cbrnn
