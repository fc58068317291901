#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbrnn/audio.hpp"
#include "cbrnn/tensor.hpp"

namespace cbrnn {

struct FrequencyBand {
  double fmin = 0.0;
  double fmax = 0.0;
};

struct FeatureConfig {
  double frame_len_ms = 40.0;
  double hop_ms = 20.0;
  std::size_t fft_size = 2048;
  std::size_t n_mels = 40;
  double mel_fmin = 0.0;
  double mel_fmax = 22050.0;
  std::size_t domfreq_k = 3;
  double domfreq_fmin = 500.0;
  double domfreq_fmax = 8000.0;
  /// Peaks below this fraction of the frame's maximum magnitude are dropped.
  double peak_threshold_ratio = 0.1;
  /// Restricts both feature classes to [band_fmin, band_fmax].
  bool band_limited = false;
  double band_fmin = 3000.0;
  double band_fmax = 8000.0;
  double log_floor = 1e-10;

  FrequencyBand mel_band() const;
  FrequencyBand domfreq_band() const;
  std::size_t frame_samples(int sample_rate) const;
  std::size_t hop_samples(int sample_rate) const;
  std::size_t n_bins() const { return fft_size / 2 + 1; }

  /// Throws ConfigError on any violated invariant for this sample rate.
  void validate(int sample_rate) const;
};

/// Per-clip network input: log mel-band energies (T x n_mels x 1) and
/// dominant frequencies (T x K x 2, plane 0 Hz, plane 1 linear magnitude).
struct FeaturePair {
  std::string clip_id;
  Tensor mbe;
  Tensor domfreq;

  std::size_t frames() const { return mbe.time(); }
  friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

/// Frames start every hop; frames running past the end are zero-filled.
/// T = ceil(samples / hop).
Tensor frame_signal(const AudioClip& clip, const FeatureConfig& cfg);

/// Symmetric Hamming window, w[i] = 0.54 - 0.46 cos(2 pi i / (n - 1)).
std::vector<double> hamming(std::size_t n);

/// In-place radix-2 complex FFT on split real/imaginary arrays.
class Fft {
 public:
  explicit Fft(std::size_t n);
  std::size_t size() const { return n_; }
  void forward(std::span<double> re, std::span<double> im) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// Hamming-windows each frame, zero-pads to fft_size and returns |DFT| for
/// bins 0..fft_size/2.
Tensor stft_magnitude(const Tensor& frames, const FeatureConfig& cfg);

struct MelFilterbank {
  /// n_mels x n_bins weights, stored as a Tensor with channel extent 1.
  Tensor weights;
  /// n_mels + 2 breakpoints in Hz (lower edge, centers, upper edge).
  std::vector<double> edges_hz;
  /// Inclusive [first, last] FFT bins whose frequency lies inside each triangle.
  std::vector<std::pair<std::size_t, std::size_t>> support;

  std::size_t bands() const { return weights.time(); }
  double center_hz(std::size_t m) const { return edges_hz[m + 1]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with centers evenly spaced on the mel scale and
/// unit-area (2 / width) normalization.
MelFilterbank mel_filterbank(const FeatureConfig& cfg, int sample_rate);

/// out[t, m] = log(floor + sum_k fb[m, k] * spec[t, k]^2)
Tensor log_mel_energies(const Tensor& spectrogram, const MelFilterbank& fb, double log_floor = 1e-10);

struct ParabolicPeak {
  double offset = 0.0;
  double log_magnitude = 0.0;
};

/// Vertex of the parabola through (-1, alpha), (0, beta), (1, gamma).
/// A flat triple yields offset 0.
ParabolicPeak parabolic_vertex(double alpha, double beta, double gamma);

Tensor dominant_frequencies(const Tensor& spectrogram, const FeatureConfig& cfg, int sample_rate);

FeaturePair extract_features(const AudioClip& clip, const FeatureConfig& cfg);

}  // namespace cbrnn
