#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cbrnn/error.hpp"
#include "cbrnn/features.hpp"
#include "support/oracles.hpp"

namespace cbrnn {
namespace {

AudioClip tone_clip(std::vector<std::pair<double, double>> tones, std::size_t n = 441000, int sr = 44100) {
  AudioClip c{"tone", sr, std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (auto [hz, amp] : tones) c.samples[i] += amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr);
  }
  return c;
}

TEST(FrameSignal, TenSecondClipGivesFiveHundredFrames) {
  AudioClip c{"x", 44100, std::vector<double>(441000, 0.0)};
  FeatureConfig cfg;
  auto frames = frame_signal(c, cfg);
  EXPECT_EQ(frames.time(), 500u);
  EXPECT_EQ(frames.feature(), 1764u);
  for (double v : frames.data()) EXPECT_EQ(v, 0.0);
}

TEST(FrameSignal, ImpulseStaysInFrameZero) {
  AudioClip c{"x", 44100, std::vector<double>(441000, 0.0)};
  c.samples[0] = 1.0;
  auto frames = frame_signal(c, FeatureConfig{});
  for (std::size_t t = 0; t < frames.time(); ++t) {
    for (std::size_t i = 0; i < frames.feature(); ++i) {
      EXPECT_EQ(frames(t, i), (t == 0 && i == 0) ? 1.0 : 0.0);
    }
  }
}

TEST(FrameSignal, ZeroHopRejected) {
  FeatureConfig cfg;
  cfg.hop_ms = 0.0;
  AudioClip c{"x", 44100, std::vector<double>(100, 0.0)};
  EXPECT_THROW(frame_signal(c, cfg), ConfigError);
}

TEST(Hamming, EndpointsCenterSymmetry) {
  auto w = hamming(1765);
  EXPECT_EQ(w[882], 1.0);
  EXPECT_NEAR(w.front(), 0.08, 1e-15);
  EXPECT_NEAR(w.back(), 0.08, 1e-15);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], w[w.size() - 1 - i]);
  auto even = hamming(1764);
  for (std::size_t i = 0; i < even.size(); ++i) EXPECT_EQ(even[i], even[even.size() - 1 - i]);
  EXPECT_THROW(hamming(1), ConfigError);
}

TEST(Stft, MatchesDirectDft) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  FeatureConfig cfg;
  cfg.fft_size = 64;
  Tensor frames(2, 50);
  for (auto& v : frames.storage()) v = u(rng);
  auto spec = stft_magnitude(frames, cfg);
  auto w = hamming(50);
  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<double> windowed(50);
    for (std::size_t i = 0; i < 50; ++i) windowed[i] = frames(t, i) * w[i];
    auto ref = oracle::dft_magnitude(windowed, 64);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(spec(t, k), ref[k], 1e-12);
  }
}

TEST(Stft, ZeroFrameAndBinCenteredSinusoid) {
  FeatureConfig cfg;
  Tensor frames(2, 1764);
  const std::size_t bin = 100;
  for (std::size_t i = 0; i < 1764; ++i) {
    frames(1, i) = std::sin(2.0 * std::numbers::pi * bin * static_cast<double>(i) / 2048.0);
  }
  auto spec = stft_magnitude(frames, cfg);
  for (std::size_t k = 0; k < spec.feature(); ++k) EXPECT_EQ(spec(0, k), 0.0);
  std::size_t arg = 0;
  for (std::size_t k = 0; k < spec.feature(); ++k) {
    if (spec(1, k) > spec(1, arg)) arg = k;
  }
  EXPECT_EQ(arg, bin);
}

TEST(Stft, Parseval) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 1);
  FeatureConfig cfg;
  Tensor frames(4, 1764);
  for (auto& v : frames.storage()) v = g(rng);
  auto spec = stft_magnitude(frames, cfg);
  auto w = hamming(1764);
  const std::size_t n = cfg.fft_size;
  for (std::size_t t = 0; t < 4; ++t) {
    double energy = 0.0;
    for (std::size_t i = 0; i < 1764; ++i) energy += (frames(t, i) * w[i]) * (frames(t, i) * w[i]);
    double full = spec(t, 0) * spec(t, 0) + spec(t, n / 2) * spec(t, n / 2);
    for (std::size_t k = 1; k < n / 2; ++k) full += 2.0 * spec(t, k) * spec(t, k);
    EXPECT_NEAR(full / (static_cast<double>(n) * energy), 1.0, 1e-9);
  }
}

TEST(MelFilterbank, RowsPositiveCentersIncreasing) {
  FeatureConfig cfg;
  auto fb = mel_filterbank(cfg, 44100);
  ASSERT_EQ(fb.bands(), 40u);
  for (std::size_t m = 0; m < 40; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < fb.weights.feature(); ++k) {
      EXPECT_GE(fb.weights(m, k), 0.0);
      sum += fb.weights(m, k);
    }
    EXPECT_GT(sum, 0.0);
    if (m > 0) EXPECT_GT(fb.center_hz(m), fb.center_hz(m - 1));
  }
}

TEST(MelFilterbank, FirstFilterSupportStartsAtBinZero) {
  // Independent breakpoint: filter 0's lower edge sits at mel(0 Hz) = 0,
  // i.e. 0 Hz, whose bin index is ceil(0 / (44100 / 2048)) = 0.
  const double lower_mel = 2595.0 * std::log10(1.0 + 0.0 / 700.0);
  const double lower_hz = 700.0 * (std::pow(10.0, lower_mel / 2595.0) - 1.0);
  const auto expected_first = static_cast<std::size_t>(std::ceil(lower_hz / (44100.0 / 2048.0)));
  ASSERT_EQ(expected_first, 0u);
  auto fb = mel_filterbank(FeatureConfig{}, 44100);
  EXPECT_EQ(fb.support[0].first, expected_first);
}

TEST(MelFilterbank, TooManyBandsForBins) {
  FeatureConfig cfg;
  cfg.fft_size = 64;
  cfg.frame_len_ms = 1.0;
  cfg.hop_ms = 0.5;
  cfg.n_mels = 40;
  EXPECT_THROW(mel_filterbank(cfg, 44100), ConfigError);
}

TEST(LogMel, SilenceFloorAndScaling) {
  FeatureConfig cfg;
  auto fb = mel_filterbank(cfg, 44100);
  Tensor zero(3, cfg.n_bins());
  auto out = log_mel_energies(zero, fb);
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, std::log(1e-10));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Tensor spec(2, cfg.n_bins());
  for (auto& v : spec.storage()) v = u(rng);
  Tensor doubled = spec;
  for (auto& v : doubled.storage()) v *= 2.0;
  auto a = log_mel_energies(spec, fb, 0.0 + 1e-300);
  auto b = log_mel_energies(doubled, fb, 0.0 + 1e-300);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.storage()[i] - a.storage()[i], std::log(4.0), 1e-12);
}

TEST(LogMel, WhiteNoiseBandsWithinThreeNats) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 0.1);
  AudioClip c{"noise", 44100, std::vector<double>(100 * 882, 0.0)};
  for (auto& s : c.samples) s = g(rng);
  auto pair = extract_features(c, FeatureConfig{});
  ASSERT_EQ(pair.mbe.time(), 100u);
  std::vector<double> mean(40, 0.0);
  for (std::size_t t = 0; t < 100; ++t) {
    for (std::size_t m = 0; m < 40; ++m) {
      ASSERT_TRUE(std::isfinite(pair.mbe(t, m)));
      mean[m] += pair.mbe(t, m) / 100.0;
    }
  }
  auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  EXPECT_LE(*hi - *lo, 3.0);
}

TEST(Parabolic, ExactOnParabola) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.5, 0.5), a(-3.0, -0.1), c(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double x0 = u(rng), curv = a(rng), peak = c(rng);
    auto y = [&](double x) { return curv * (x - x0) * (x - x0) + peak; };
    auto v = parabolic_vertex(y(-1), y(0), y(1));
    EXPECT_NEAR(v.offset, x0, 1e-12);
    EXPECT_NEAR(v.log_magnitude, peak, 1e-12);
  }
  auto flat = parabolic_vertex(1.0, 1.0, 1.0);
  EXPECT_EQ(flat.offset, 0.0);
  EXPECT_EQ(flat.log_magnitude, 1.0);
}

TEST(DominantFrequencies, PureToneRecovered) {
  auto pair = extract_features(tone_clip({{3000.0, 0.5}}), FeatureConfig{});
  for (std::size_t t = 1; t + 1 < pair.frames(); ++t) {
    EXPECT_NEAR(pair.domfreq(t, 0, 0), 3000.0, 5.0);
    EXPECT_EQ(pair.domfreq(t, 1, 0), 0.0);
    EXPECT_EQ(pair.domfreq(t, 1, 1), 0.0);
    EXPECT_EQ(pair.domfreq(t, 2, 0), 0.0);
  }
}

TEST(DominantFrequencies, TwoTonesOrderedByMagnitude) {
  auto pair = extract_features(tone_clip({{1000.0, 0.2}, {4000.0, 0.4}}), FeatureConfig{});
  for (std::size_t t = 1; t + 1 < pair.frames(); ++t) {
    EXPECT_NEAR(pair.domfreq(t, 0, 0), 4000.0, 5.0);
    EXPECT_NEAR(pair.domfreq(t, 1, 0), 1000.0, 5.0);
    EXPECT_GT(pair.domfreq(t, 0, 1), pair.domfreq(t, 1, 1));
  }
}

TEST(DominantFrequencies, InvariantsOnNoise) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.1);
  AudioClip c{"noise", 44100, std::vector<double>(441000)};
  for (auto& s : c.samples) s = g(rng);
  FeatureConfig cfg;
  auto pair = extract_features(c, cfg);
  for (std::size_t t = 0; t < pair.frames(); ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      const double hz = pair.domfreq(t, k, 0);
      EXPECT_TRUE(hz == 0.0 || (hz >= 500.0 && hz <= 8000.0)) << hz;
      EXPECT_GE(pair.domfreq(t, k, 1), 0.0);
      if (k > 0) EXPECT_GE(pair.domfreq(t, k - 1, 1), pair.domfreq(t, k, 1));
    }
  }
}

TEST(ExtractFeatures, SilenceShapesAndValues) {
  AudioClip c{"quiet", 44100, std::vector<double>(441000, 0.0)};
  auto pair = extract_features(c, FeatureConfig{});
  EXPECT_EQ(pair.mbe.dims(), (std::array<std::size_t, 3>{500, 40, 1}));
  EXPECT_EQ(pair.domfreq.dims(), (std::array<std::size_t, 3>{500, 3, 2}));
  for (double v : pair.mbe.data()) EXPECT_DOUBLE_EQ(v, std::log(1e-10));
  for (double v : pair.domfreq.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(pair.clip_id, "quiet");
}

TEST(ExtractFeatures, DeterministicAndShiftCovariant) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 0.2);
  const std::size_t hop = 882;
  AudioClip x{"x", 44100, std::vector<double>(60 * hop)};
  for (auto& s : x.samples) s = g(rng);
  AudioClip y{"y", 44100, std::vector<double>(hop, 0.0)};
  y.samples.insert(y.samples.end(), x.samples.begin(), x.samples.end() - hop);
  FeatureConfig cfg;
  auto fx = extract_features(x, cfg);
  EXPECT_EQ(fx, extract_features(x, cfg));
  auto fy = extract_features(y, cfg);
  for (std::size_t t = 0; t + 3 < fx.frames(); ++t) {
    for (std::size_t m = 0; m < 40; ++m) EXPECT_NEAR(fy.mbe(t + 1, m), fx.mbe(t, m), 1e-9);
  }
}

TEST(ExtractFeatures, BandLimitedConfinesBothClasses) {
  FeatureConfig cfg;
  cfg.band_limited = true;
  auto fb = mel_filterbank(cfg, 44100);
  const double bin_hz = 44100.0 / 2048.0;
  for (std::size_t m = 0; m < fb.bands(); ++m) {
    for (std::size_t k = 0; k < fb.weights.feature(); ++k) {
      if (fb.weights(m, k) > 0.0) {
        EXPECT_GE(k * bin_hz, 3000.0);
        EXPECT_LE(k * bin_hz, 8000.0);
      }
    }
  }
  auto pair = extract_features(tone_clip({{1000.0, 0.5}, {5000.0, 0.3}}), cfg);
  for (std::size_t t = 1; t + 1 < pair.frames(); ++t) {
    EXPECT_NEAR(pair.domfreq(t, 0, 0), 5000.0, 5.0);
    EXPECT_EQ(pair.domfreq(t, 1, 0), 0.0);
  }
}

TEST(FeatureConfig, InvalidBandsRejected) {
  FeatureConfig cfg;
  cfg.mel_fmax = 30000.0;
  EXPECT_THROW(cfg.validate(44100), ConfigError);
  cfg = {};
  cfg.domfreq_fmin = 9000.0;
  EXPECT_THROW(cfg.validate(44100), ConfigError);
  cfg = {};
  cfg.fft_size = 1024;
  EXPECT_THROW(cfg.validate(44100), ConfigError);
}

}  // namespace
}  // namespace cbrnn
