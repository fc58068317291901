#include "cbrnn/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t p) { pos_ = std::min(p, bytes_.size()); }

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                      static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24;
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::string tag(const char* field) {
    need(4, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (!has(n)) throw DecodeError(std::string("truncated WAV header while reading ") + field);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double read_sample(const std::uint8_t* p, const WavFormat& fmt) {
  if (fmt.format == kFormatFloat) {
    float f;
    std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                        static_cast<std::uint32_t>(p[2]) << 16 |
                        static_cast<std::uint32_t>(p[3]) << 24;
    std::memcpy(&f, &raw, sizeof f);
    if (!std::isfinite(f)) throw DecodeError("non-finite float sample in data chunk");
    return std::clamp(static_cast<double>(f), -1.0, 1.0);
  }
  switch (fmt.bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
      auto v = static_cast<std::int16_t>(p[0] | p[1] << 8);
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | p[1] << 8 | p[2] << 16;
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                          static_cast<std::uint32_t>(p[2]) << 16 |
                          static_cast<std::uint32_t>(p[3]) << 24;
      return static_cast<std::int32_t>(raw) / 2147483648.0;
    }
    default:
      throw UnsupportedFormatError("unsupported PCM bit depth " + std::to_string(fmt.bits));
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

void AudioClip::validate() const {
  if (sample_rate <= 0) throw DecodeError("clip '" + id + "': sample_rate must be positive");
  if (samples.empty()) throw DecodeError("clip '" + id + "': no samples");
  for (double s : samples) {
    if (!std::isfinite(s)) throw DecodeError("clip '" + id + "': non-finite sample");
  }
}

AudioClip decode_wav_bytes(std::span<const std::uint8_t> bytes, std::string id) {
  ByteReader r(bytes);
  if (r.tag("RIFF magic") != "RIFF") throw DecodeError("bad RIFF magic");
  r.u32("RIFF size");
  if (r.tag("WAVE tag") != "WAVE") throw DecodeError("bad WAVE tag");

  std::optional<WavFormat> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (r.remaining() >= 8) {
    std::string chunk = r.tag("chunk id");
    std::uint32_t size = r.u32("chunk size");
    std::size_t body = r.pos();
    if (chunk == "fmt ") {
      if (size < 16) throw DecodeError("fmt chunk size " + std::to_string(size) + " < 16");
      WavFormat f;
      f.format = r.u16("audio_format");
      f.channels = r.u16("channels");
      f.sample_rate = r.u32("sample_rate");
      r.u32("byte_rate");
      f.block_align = r.u16("block_align");
      f.bits = r.u16("bits_per_sample");
      if (f.format == kFormatExtensible) {
        if (size < 40) throw DecodeError("fmt chunk size too small for WAVE_FORMAT_EXTENSIBLE");
        r.u16("cb_size");
        r.u16("valid_bits");
        r.u32("channel_mask");
        f.format = r.u16("subformat");
      }
      fmt = f;
    } else if (chunk == "data") {
      if (size > r.remaining()) {
        throw DecodeError("data chunk size " + std::to_string(size) + " exceeds the " +
                          std::to_string(r.remaining()) + " bytes present");
      }
      data = bytes.subspan(body, size);
      have_data = true;
    }
    r.seek(body + size + (size & 1u));
  }

  if (!fmt) throw DecodeError("missing fmt chunk");
  if (!have_data) throw DecodeError("missing data chunk");
  if (fmt->format != kFormatPcm && fmt->format != kFormatFloat) {
    throw UnsupportedFormatError("unsupported audio_format " + std::to_string(fmt->format));
  }
  if (fmt->format == kFormatFloat && fmt->bits != 32) {
    throw UnsupportedFormatError("unsupported float bit depth " + std::to_string(fmt->bits));
  }
  if (fmt->format == kFormatPcm && fmt->bits != 8 && fmt->bits != 16 && fmt->bits != 24 &&
      fmt->bits != 32) {
    throw UnsupportedFormatError("unsupported PCM bit depth " + std::to_string(fmt->bits));
  }
  if (fmt->channels == 0) throw DecodeError("channels is 0");
  if (fmt->sample_rate == 0) throw DecodeError("sample_rate is 0");
  std::size_t bytes_per_sample = fmt->bits / 8;
  if (fmt->block_align != bytes_per_sample * fmt->channels) {
    throw DecodeError("block_align " + std::to_string(fmt->block_align) +
                      " inconsistent with channels and bits_per_sample");
  }

  std::size_t frames = data.size() / fmt->block_align;
  AudioClip clip;
  clip.id = std::move(id);
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* frame = data.data() + i * fmt->block_align;
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) acc += read_sample(frame + c * bytes_per_sample, *fmt);
    clip.samples[i] = acc / fmt->channels;
  }
  clip.validate();
  return clip;
}

AudioClip decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav_bytes(bytes, path.stem().string());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved, int channels,
                                     int sample_rate, SampleEncoding encoding) {
  if (channels <= 0 || sample_rate <= 0) throw ConfigError("encode_wav: bad channels or rate");
  std::uint16_t bits = 16;
  std::uint16_t format = kFormatPcm;
  switch (encoding) {
    case SampleEncoding::kPcm8: bits = 8; break;
    case SampleEncoding::kPcm16: bits = 16; break;
    case SampleEncoding::kPcm24: bits = 24; break;
    case SampleEncoding::kPcm32: bits = 32; break;
    case SampleEncoding::kFloat32: bits = 32; format = kFormatFloat; break;
  }
  const std::uint32_t bytes_per_sample = bits / 8u;
  const auto data_size = static_cast<std::uint32_t>(interleaved.size() * bytes_per_sample);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size + 1);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size + (data_size & 1u));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * channels * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  for (double x : interleaved) {
    double s = std::clamp(x, -1.0, 1.0);
    switch (encoding) {
      case SampleEncoding::kPcm8:
        out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(s * 128.0) + 128, 0L, 255L)));
        break;
      case SampleEncoding::kPcm16:
        put_u16(out, static_cast<std::uint16_t>(
                         static_cast<std::int16_t>(std::clamp(std::lround(s * 32768.0), -32768L, 32767L))));
        break;
      case SampleEncoding::kPcm24: {
        auto v = static_cast<std::int32_t>(std::clamp(std::lround(s * 8388608.0), -8388608L, 8388607L));
        auto u = static_cast<std::uint32_t>(v);
        for (int i = 0; i < 3; ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
        break;
      }
      case SampleEncoding::kPcm32: {
        auto v = static_cast<std::int64_t>(std::llround(s * 2147483648.0));
        v = std::clamp<std::int64_t>(v, INT32_MIN, INT32_MAX);
        put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)));
        break;
      }
      case SampleEncoding::kFloat32: {
        auto f = static_cast<float>(s);
        std::uint32_t raw;
        std::memcpy(&raw, &f, sizeof raw);
        put_u32(out, raw);
        break;
      }
    }
  }
  if (data_size & 1u) out.push_back(0);
  return out;
}

void write_wav(const std::filesystem::path& path, std::span<const double> interleaved, int channels,
               int sample_rate, SampleEncoding encoding) {
  auto bytes = encode_wav(interleaved, channels, sample_rate, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

AudioClip conform_clip(AudioClip clip, int required_rate, double seconds) {
  if (clip.sample_rate != required_rate) {
    throw UnsupportedFormatError("clip '" + clip.id + "' sampled at " +
                                 std::to_string(clip.sample_rate) + " Hz; expected " +
                                 std::to_string(required_rate) + " Hz (no resampling)");
  }
  auto target = static_cast<std::size_t>(std::llround(seconds * required_rate));
  clip.samples.resize(target, 0.0);
  return clip;
}

bool Manifest::fully_labeled() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const ManifestEntry& e) { return e.label != Label::kUnknown; });
}

const ManifestEntry* Manifest::find(const std::string& clip_id) const {
  for (const auto& e : entries) {
    if (e.clip_id == clip_id) return &e;
  }
  return nullptr;
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& audio_dir, bool require_audio) {
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("manifest is empty (missing header row)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  auto header = split_csv_line(line);
  int id_col = -1;
  int label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto h = lower(header[i]);
    if (h == "itemid") id_col = static_cast<int>(i);
    if (h == "hasbird") label_col = static_cast<int>(i);
  }
  if (id_col < 0) throw ManifestError("manifest header lacks an 'itemid' column");

  Manifest m;
  std::set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) <= id_col || fields[id_col].empty()) {
      throw ManifestError("row " + std::to_string(row) + ": missing itemid");
    }
    ManifestEntry e;
    e.clip_id = fields[id_col];
    if (!seen.insert(e.clip_id).second) {
      throw ManifestError("row " + std::to_string(row) + ": duplicate itemid '" + e.clip_id + "'");
    }
    if (label_col >= 0 && static_cast<int>(fields.size()) > label_col && !fields[label_col].empty()) {
      const auto& v = fields[label_col];
      if (v == "1") {
        e.label = Label::kPresent;
      } else if (v == "0") {
        e.label = Label::kAbsent;
      } else {
        throw ManifestError("row " + std::to_string(row) + ": hasbird '" + v + "' is not 0 or 1");
      }
    }
    std::filesystem::path file = e.clip_id;
    if (file.extension() != ".wav") file += ".wav";
    e.path = audio_dir / file;
    if (require_audio && !std::filesystem::exists(e.path)) {
      throw ManifestError("row " + std::to_string(row) + ": audio file not found: " + e.path.string());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& csv_path, const std::filesystem::path& audio_dir,
                       bool require_audio) {
  std::ifstream in(csv_path);
  if (!in) throw ManifestError("cannot open manifest " + csv_path.string());
  return parse_manifest(in, audio_dir, require_audio);
}

void write_manifest(const std::filesystem::path& csv_path, const Manifest& manifest) {
  std::ofstream out(csv_path);
  if (!out) throw Error("cannot write " + csv_path.string());
  out << "itemid,hasbird\n";
  for (const auto& e : manifest.entries) {
    out << e.clip_id << ',';
    if (e.label != Label::kUnknown) out << static_cast<int>(e.label);
    out << '\n';
  }
}

}  // namespace cbrnn
