#include "cbrnn/feature_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

constexpr char kMagic[8] = {'C', 'B', 'R', 'N', 'F', 'E', 'A', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > b_.size()) throw CacheError(std::string("feature cache truncated in ") + what);
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

Tensor read_tensor_shape(Reader& r, const char* what) {
  std::uint32_t t = r.u32(what);
  std::uint32_t f = r.u32(what);
  std::uint32_t c = r.u32(what);
  return Tensor(t, f, c);
}

}  // namespace

std::vector<std::uint8_t> encode_feature_cache(const FeaturePair& pair) {
  std::vector<std::uint8_t> out;
  out.reserve(64 + pair.clip_id.size() + 8 * (pair.mbe.size() + pair.domfreq.size()));
  for (char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kFeatureCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(pair.clip_id.size()));
  out.insert(out.end(), pair.clip_id.begin(), pair.clip_id.end());
  for (const Tensor* t : {&pair.mbe, &pair.domfreq}) {
    for (auto d : t->dims()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : pair.mbe.data()) put_f64(out, v);
  for (double v : pair.domfreq.data()) put_f64(out, v);
  return out;
}

FeaturePair decode_feature_cache(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw CacheError("not a feature cache (bad magic)");
  std::uint32_t version = r.u32("version");
  if (version != kFeatureCacheVersion) {
    throw CacheError("feature cache version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kFeatureCacheVersion) + ")");
  }
  std::uint32_t id_len = r.u32("id length");
  auto id = r.bytes(id_len, "clip id");
  FeaturePair pair;
  pair.clip_id.assign(id.begin(), id.end());
  pair.mbe = read_tensor_shape(r, "MBE shape");
  pair.domfreq = read_tensor_shape(r, "DomFreq shape");

  const std::size_t expected = 8 * (pair.mbe.size() + pair.domfreq.size());
  if (r.remaining() != expected) {
    throw CacheError("feature cache payload for '" + pair.clip_id + "' has " +
                     std::to_string(r.remaining()) + " bytes; header declares " + std::to_string(expected));
  }
  for (double& v : pair.mbe.data()) v = r.f64();
  for (double& v : pair.domfreq.data()) v = r.f64();
  return pair;
}

void write_feature_cache(const FeaturePair& pair, const std::filesystem::path& path) {
  auto bytes = encode_feature_cache(pair);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CacheError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CacheError("short write to " + path.string());
}

FeaturePair read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_feature_cache(bytes);
  } catch (const CacheError& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cbrnn
