#include "cbrnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void check_band(const char* name, FrequencyBand band, int sample_rate) {
  double nyquist = sample_rate / 2.0;
  if (!(band.fmin >= 0.0 && band.fmin < band.fmax && band.fmax <= nyquist)) {
    throw ConfigError(std::string(name) + " band [" + std::to_string(band.fmin) + ", " +
                      std::to_string(band.fmax) + "] Hz must satisfy 0 <= fmin < fmax <= " +
                      std::to_string(nyquist));
  }
}

}  // namespace

FrequencyBand FeatureConfig::mel_band() const {
  return band_limited ? FrequencyBand{band_fmin, band_fmax} : FrequencyBand{mel_fmin, mel_fmax};
}

FrequencyBand FeatureConfig::domfreq_band() const {
  return band_limited ? FrequencyBand{band_fmin, band_fmax}
                      : FrequencyBand{domfreq_fmin, domfreq_fmax};
}

std::size_t FeatureConfig::frame_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::llround(frame_len_ms * sample_rate / 1000.0));
}

std::size_t FeatureConfig::hop_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
}

void FeatureConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (hop_samples(sample_rate) == 0) throw ConfigError("hop of 0 samples");
  std::size_t frame = frame_samples(sample_rate);
  if (frame < 2) throw ConfigError("frame shorter than 2 samples");
  if (!is_power_of_two(fft_size)) throw ConfigError("fft_size must be a power of two");
  if (frame > fft_size) {
    throw ConfigError("frame of " + std::to_string(frame) + " samples exceeds fft_size " +
                      std::to_string(fft_size));
  }
  if (n_mels == 0) throw ConfigError("n_mels must be >= 1");
  if (domfreq_k == 0) throw ConfigError("domfreq_k must be >= 1");
  if (!(peak_threshold_ratio >= 0.0 && peak_threshold_ratio <= 1.0)) {
    throw ConfigError("peak_threshold_ratio must lie in [0, 1]");
  }
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  check_band("mel", mel_band(), sample_rate);
  check_band("dominant-frequency", domfreq_band(), sample_rate);
}

Tensor frame_signal(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const std::size_t hop = cfg.hop_samples(clip.sample_rate);
  const std::size_t len = cfg.frame_samples(clip.sample_rate);
  const std::size_t n = clip.samples.size();
  const std::size_t frames = (n + hop - 1) / hop;
  Tensor out(frames, len);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t start = t * hop;
    std::size_t count = std::min(len, n - start);
    std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(start), count,
                out.storage().begin() + static_cast<std::ptrdiff_t>(t * len));
  }
  return out;
}

std::vector<double> hamming(std::size_t n) {
  if (n < 2) throw ConfigError("hamming window needs n >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
  }
  // Exact symmetry regardless of cos rounding.
  for (std::size_t i = 0; i < n / 2; ++i) w[n - 1 - i] = w[i];
  if (n % 2 == 1) w[n / 2] = 1.0;
  return w;
}

Fft::Fft(std::size_t n) : n_(n), bitrev_(n), cos_(n / 2), sin_(n / 2) {
  if (!is_power_of_two(n)) throw ConfigError("FFT size must be a power of two");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cos_[k] = std::cos(angle);
    sin_[k] = std::sin(angle);
  }
}

void Fft::forward(std::span<double> re, std::span<double> im) const {
  for (std::size_t i = 0; i < n_; ++i) {
    std::size_t j = bitrev_[i];
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = cos_[k * stride];
        const double wi = sin_[k * stride];
        const std::size_t a = start + k;
        const std::size_t b = a + half;
        const double tr = re[b] * wr - im[b] * wi;
        const double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }
}

Tensor stft_magnitude(const Tensor& frames, const FeatureConfig& cfg) {
  const std::size_t len = frames.feature();
  if (len > cfg.fft_size) throw ConfigError("frame length exceeds fft_size");
  const auto window = hamming(len);
  const Fft fft(cfg.fft_size);
  const std::size_t bins = cfg.n_bins();
  Tensor out(frames.time(), bins);
  std::vector<double> re(cfg.fft_size), im(cfg.fft_size);
  for (std::size_t t = 0; t < frames.time(); ++t) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) re[i] = frames(t, i) * window[i];
    fft.forward(re, im);
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::hypot(re[k], im[k]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(const FeatureConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const auto band = cfg.mel_band();
  const std::size_t bins = cfg.n_bins();
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(cfg.fft_size);

  MelFilterbank fb;
  fb.weights = Tensor(cfg.n_mels, bins);
  fb.edges_hz.resize(cfg.n_mels + 2);
  const double mel_lo = hz_to_mel(band.fmin);
  const double mel_hi = hz_to_mel(band.fmax);
  for (std::size_t i = 0; i < fb.edges_hz.size(); ++i) {
    double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    fb.edges_hz[i] = mel_to_hz(mel);
  }
  fb.edges_hz.front() = band.fmin;
  fb.edges_hz.back() = band.fmax;

  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = fb.edges_hz[m];
    const double center = fb.edges_hz[m + 1];
    const double hi = fb.edges_hz[m + 2];
    const double norm = 2.0 / (hi - lo);
    std::size_t first = bins;
    std::size_t last = 0;
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      if (f < lo || f > hi) continue;
      first = std::min(first, k);
      last = std::max(last, k);
      double w = std::min((f - lo) / (center - lo), (hi - f) / (hi - center));
      if (w > 0.0) {
        fb.weights(m, k) = w * norm;
        any = true;
      }
    }
    if (!any) {
      throw ConfigError("mel band " + std::to_string(m) + " covers no FFT bin: fewer FFT bins than " +
                        "mel bands in [" + std::to_string(band.fmin) + ", " +
                        std::to_string(band.fmax) + "] Hz");
    }
    fb.support.emplace_back(first, last);
  }
  return fb;
}

Tensor log_mel_energies(const Tensor& spectrogram, const MelFilterbank& fb, double log_floor) {
  const std::size_t bins = spectrogram.feature();
  if (fb.weights.feature() != bins) {
    throw ShapeError("filterbank expects " + std::to_string(fb.weights.feature()) +
                     " bins, spectrogram has " + std::to_string(bins));
  }
  Tensor out(spectrogram.time(), fb.bands());
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < spectrogram.time(); ++t) {
    for (std::size_t k = 0; k < bins; ++k) power[k] = spectrogram(t, k) * spectrogram(t, k);
    for (std::size_t m = 0; m < fb.bands(); ++m) {
      const auto [first, last] = fb.support[m];
      double acc = 0.0;
      for (std::size_t k = first; k <= last; ++k) acc += fb.weights(m, k) * power[k];
      out(t, m) = std::log(log_floor + acc);
    }
  }
  return out;
}

ParabolicPeak parabolic_vertex(double alpha, double beta, double gamma) {
  const double denom = alpha - 2.0 * beta + gamma;
  const double p = denom == 0.0 ? 0.0 : 0.5 * (alpha - gamma) / denom;
  return {p, beta - 0.25 * (alpha - gamma) * p};
}

Tensor dominant_frequencies(const Tensor& spectrogram, const FeatureConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const auto band = cfg.domfreq_band();
  const std::size_t bins = spectrogram.feature();
  const std::size_t k_slots = cfg.domfreq_k;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(cfg.fft_size);
  auto safe_log = [](double v) { return std::log(std::max(v, std::numeric_limits<double>::min())); };

  Tensor out(spectrogram.time(), k_slots, 2);
  struct Peak {
    double hz;
    double magnitude;
  };
  std::vector<Peak> peaks;
  for (std::size_t t = 0; t < spectrogram.time(); ++t) {
    double frame_max = 0.0;
    for (std::size_t k = 0; k < bins; ++k) frame_max = std::max(frame_max, spectrogram(t, k));
    const double floor = cfg.peak_threshold_ratio * frame_max;

    peaks.clear();
    for (std::size_t k = 1; k + 1 < bins; ++k) {
      const double left = spectrogram(t, k - 1);
      const double mid = spectrogram(t, k);
      const double right = spectrogram(t, k + 1);
      if (!(left < mid && mid >= right)) continue;
      if (mid < floor) continue;
      const auto v = parabolic_vertex(safe_log(left), safe_log(mid), safe_log(right));
      const double hz = (static_cast<double>(k) + v.offset) * bin_hz;
      if (hz < band.fmin || hz > band.fmax) continue;
      peaks.push_back({hz, std::exp(v.log_magnitude)});
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
    for (std::size_t s = 0; s < k_slots && s < peaks.size(); ++s) {
      out(t, s, 0) = peaks[s].hz;
      out(t, s, 1) = peaks[s].magnitude;
    }
  }
  return out;
}

FeaturePair extract_features(const AudioClip& clip, const FeatureConfig& cfg) {
  clip.validate();
  cfg.validate(clip.sample_rate);
  const Tensor frames = frame_signal(clip, cfg);
  const Tensor spec = stft_magnitude(frames, cfg);
  const MelFilterbank fb = mel_filterbank(cfg, clip.sample_rate);
  FeaturePair pair;
  pair.clip_id = clip.id;
  pair.mbe = log_mel_energies(spec, fb, cfg.log_floor);
  pair.domfreq = dominant_frequencies(spec, cfg, clip.sample_rate);
  return pair;
}

}  // namespace cbrnn
