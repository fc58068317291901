#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cbrnn/audio.hpp"
#include "cbrnn/error.hpp"
#include "cbrnn/feature_cache.hpp"

namespace cbrnn {
namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cbrnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(DecodeWav, Pcm16FullScaleNormalizesBy32768) {
  std::vector<double> samples(100, 32767.0 / 32768.0);
  auto bytes = encode_wav(samples, 1, 44100, SampleEncoding::kPcm16);
  auto clip = decode_wav_bytes(bytes, "x");
  ASSERT_EQ(clip.samples.size(), 100u);
  for (double s : clip.samples) EXPECT_DOUBLE_EQ(s, 32767.0 / 32768.0);
}

TEST(DecodeWav, MostNegativeCodeMapsToMinusOne) {
  std::vector<double> samples{-1.0, 0.0};
  auto clip = decode_wav_bytes(encode_wav(samples, 1, 44100, SampleEncoding::kPcm16), "x");
  EXPECT_EQ(clip.samples[0], -1.0);
  EXPECT_EQ(clip.samples[1], 0.0);
}

TEST(DecodeWav, TenSecondsAt44100) {
  std::vector<double> samples(441000, 0.25);
  auto dir = temp_dir("ten_s");
  write_wav(dir / "a.wav", samples, 1, 44100);
  auto clip = decode_wav(dir / "a.wav");
  EXPECT_EQ(clip.samples.size(), 441000u);
  EXPECT_EQ(clip.sample_rate, 44100);
  EXPECT_EQ(clip.id, "a");
}

TEST(DecodeWav, SymmetricStereoDownmixesToZero) {
  std::vector<double> interleaved;
  for (int i = 0; i < 50; ++i) {
    interleaved.push_back(0.5);
    interleaved.push_back(-0.5);
  }
  auto clip = decode_wav_bytes(encode_wav(interleaved, 2, 44100, SampleEncoding::kPcm16), "x");
  ASSERT_EQ(clip.samples.size(), 50u);
  for (double s : clip.samples) EXPECT_EQ(s, 0.0);
}

TEST(DecodeWav, AllEncodingsRoundTripWithinQuantization) {
  const std::vector<std::pair<SampleEncoding, double>> cases{{SampleEncoding::kPcm8, 1.0 / 128},
                                                             {SampleEncoding::kPcm16, 1.0 / 32768},
                                                             {SampleEncoding::kPcm24, 1.0 / 8388608},
                                                             {SampleEncoding::kPcm32, 1e-9},
                                                             {SampleEncoding::kFloat32, 1e-7}};
  std::vector<double> samples{0.0, 0.5, -0.5, 0.123, -0.987, 0.999};
  for (auto [enc, tol] : cases) {
    auto clip = decode_wav_bytes(encode_wav(samples, 1, 22050, enc), "x");
    ASSERT_EQ(clip.samples.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_NEAR(clip.samples[i], samples[i], tol);
  }
}

TEST(DecodeWav, DownmixCommutesWithIntegerScaling) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> code(-4000, 4000);
  std::vector<double> base, scaled;
  for (int i = 0; i < 200; ++i) {
    int c = code(rng);
    base.push_back(c / 32768.0);
    scaled.push_back(3 * c / 32768.0);
  }
  auto a = decode_wav_bytes(encode_wav(base, 2, 44100, SampleEncoding::kPcm16), "a");
  auto b = decode_wav_bytes(encode_wav(scaled, 2, 44100, SampleEncoding::kPcm16), "b");
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_DOUBLE_EQ(b.samples[i], 3 * a.samples[i]);
}

TEST(DecodeWav, DeterministicDecode) {
  std::vector<double> samples{0.1, -0.2, 0.3};
  auto bytes = encode_wav(samples, 1, 44100, SampleEncoding::kPcm24);
  EXPECT_EQ(decode_wav_bytes(bytes, "x").samples, decode_wav_bytes(bytes, "x").samples);
}

TEST(DecodeWav, MalformedHeaderNamesField) {
  std::vector<double> samples{0.1, 0.2};
  auto bytes = encode_wav(samples, 1, 44100, SampleEncoding::kPcm16);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(
      {
        try {
          decode_wav_bytes(bad, "x");
        } catch (const DecodeError& e) {
          EXPECT_NE(std::string(e.what()).find("RIFF"), std::string::npos);
          throw;
        }
      },
      DecodeError);

  auto truncated = bytes;
  truncated.resize(20);
  EXPECT_THROW(decode_wav_bytes(truncated, "x"), DecodeError);

  auto short_data = bytes;
  short_data.resize(short_data.size() - 2);
  try {
    decode_wav_bytes(short_data, "x");
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find("data chunk size"), std::string::npos);
  }
}

TEST(DecodeWav, UnsupportedEncodingIsExplicit) {
  std::vector<double> samples{0.1, 0.2};
  auto bytes = encode_wav(samples, 1, 44100, SampleEncoding::kPcm16);
  bytes[20] = 2;  // ADPCM format tag
  EXPECT_THROW(decode_wav_bytes(bytes, "x"), UnsupportedFormatError);
}

TEST(ConformClip, PadsTruncatesAndRejectsRate) {
  AudioClip c{"x", 44100, std::vector<double>(1000, 0.5)};
  auto padded = conform_clip(c);
  ASSERT_EQ(padded.samples.size(), 441000u);
  EXPECT_EQ(padded.samples[999], 0.5);
  EXPECT_EQ(padded.samples[1000], 0.0);

  AudioClip longer{"y", 44100, std::vector<double>(500000, 0.1)};
  EXPECT_EQ(conform_clip(longer).samples.size(), 441000u);

  AudioClip wrong{"z", 48000, std::vector<double>(480000, 0.0)};
  EXPECT_THROW(conform_clip(wrong), UnsupportedFormatError);
}

TEST(Manifest, ParsesLabels) {
  std::istringstream csv("itemid,hasbird\na,1\nb,0\nc,1\n");
  auto m = parse_manifest(csv, "/audio", false);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.entries[0].label, Label::kPresent);
  EXPECT_EQ(m.entries[1].label, Label::kAbsent);
  EXPECT_EQ(m.entries[2].label, Label::kPresent);
  EXPECT_EQ(m.entries[0].path, std::filesystem::path("/audio/a.wav"));
  EXPECT_TRUE(m.fully_labeled());
}

TEST(Manifest, FullCorpusSizedManifest) {
  std::ostringstream os;
  os << "itemid,hasbird\r\n";
  for (int i = 0; i < 7710; ++i) os << "p" << i << ",1\r\n";
  for (int i = 0; i < 7980; ++i) os << "n" << i << ",0\r\n";
  std::istringstream csv(os.str());
  auto m = parse_manifest(csv, ".", false);
  EXPECT_EQ(m.size(), 15690u);
}

TEST(Manifest, MissingLabelColumnMeansUnknown) {
  std::istringstream csv("itemid\na\nb\n");
  auto m = parse_manifest(csv, ".", false);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.entries[0].label, Label::kUnknown);
  EXPECT_FALSE(m.fully_labeled());
}

TEST(Manifest, Errors) {
  std::istringstream dup("itemid,hasbird\na,1\na,0\n");
  EXPECT_THROW(parse_manifest(dup, ".", false), ManifestError);
  std::istringstream bad("itemid,hasbird\na,1\nb,2\n");
  try {
    parse_manifest(bad, ".", false);
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
  std::istringstream missing("itemid,hasbird\nzzz,1\n");
  EXPECT_THROW(parse_manifest(missing, "/nonexistent", true), ManifestError);
}

FeaturePair random_pair(std::mt19937_64& rng, std::size_t T, std::size_t bands, std::size_t k) {
  std::normal_distribution<double> d(0.0, 100.0);
  FeaturePair p;
  p.clip_id = "clip_" + std::to_string(rng() % 1000);
  p.mbe = Tensor(T, bands, 1);
  p.domfreq = Tensor(T, k, 2);
  for (auto& v : p.mbe.storage()) v = d(rng);
  for (auto& v : p.domfreq.storage()) v = d(rng);
  return p;
}

TEST(FeatureCache, RoundTripIsBitwiseIdentity) {
  std::mt19937_64 rng(11);
  auto dir = temp_dir("cache_rt");
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_pair(rng, 1 + rng() % 50, 1 + rng() % 40, 1 + rng() % 6);
    p.mbe.storage()[0] = -0.0;
    write_feature_cache(p, dir / "x.feat");
    auto q = read_feature_cache(dir / "x.feat");
    EXPECT_EQ(encode_feature_cache(p), encode_feature_cache(q));
    EXPECT_EQ(p, q);
    EXPECT_TRUE(std::signbit(q.mbe.storage()[0]));
  }
}

TEST(FeatureCache, PayloadSizeArithmetic) {
  FeaturePair p;
  p.clip_id = "abc";
  p.mbe = Tensor(500, 40, 1);
  p.domfreq = Tensor(0, 0, 0);
  auto bytes = encode_feature_cache(p);
  const std::size_t header = 8 + 4 + 4 + 3 + 12 + 12;
  EXPECT_EQ(bytes.size(), header + 500 * 40 * 8);
}

TEST(FeatureCache, TruncationAndVersionErrors) {
  std::mt19937_64 rng(5);
  auto p = random_pair(rng, 500, 40, 3);
  p.domfreq = Tensor(0, 0, 0);
  auto bytes = encode_feature_cache(p);
  bytes.resize(bytes.size() - 500 * 8);  // 500x39 values instead of 500x40
  try {
    decode_feature_cache(bytes);
    FAIL();
  } catch (const CacheError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(500 * 39 * 8)), std::string::npos);
    EXPECT_NE(msg.find(std::to_string(500 * 40 * 8)), std::string::npos);
  }
  auto v = encode_feature_cache(p);
  v[8] = 99;
  EXPECT_THROW(decode_feature_cache(v), CacheError);
}

}  // namespace
}  // namespace cbrnn
