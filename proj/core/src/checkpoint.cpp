#include "cbrnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

constexpr char kMagic[8] = {'C', 'B', 'R', 'N', 'N', 'C', 'K', 'P'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw CacheError("checkpoint truncated");
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoul(item));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> config_to_map(const CbrnnConfig& cfg) {
  return {
      {"frames", std::to_string(cfg.frames)},
      {"mbe_bands", std::to_string(cfg.mbe_bands)},
      {"domfreq_width", std::to_string(cfg.domfreq_width)},
      {"features", to_string(cfg.features)},
      {"n_cnn_layers", std::to_string(cfg.n_cnn_layers)},
      {"n_filters", std::to_string(cfg.n_filters)},
      {"pool_time", join(cfg.pool_time)},
      {"pool_freq_mbe", join(cfg.pool_freq_mbe)},
      {"pool_freq_domfreq", join(cfg.pool_freq_domfreq)},
      {"rnn_layers", std::to_string(cfg.rnn_layers)},
      {"rnn_units", std::to_string(cfg.rnn_units)},
      {"fc_layers", std::to_string(cfg.fc_layers)},
      {"fc_units", std::to_string(cfg.fc_units)},
      {"fc_activation", to_string(cfg.fc_activation)},
      {"maxout_pieces", std::to_string(cfg.maxout_pieces)},
      {"dropout", fmt_double(cfg.dropout)},
  };
}

CbrnnConfig config_from_map(const std::map<std::string, std::string>& kv) {
  CbrnnConfig cfg;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("frames")) cfg.frames = std::stoul(*v);
    if (auto v = get("mbe_bands")) cfg.mbe_bands = std::stoul(*v);
    if (auto v = get("domfreq_width")) cfg.domfreq_width = std::stoul(*v);
    if (auto v = get("features")) cfg.features = parse_feature_set(*v);
    if (auto v = get("n_cnn_layers")) cfg.n_cnn_layers = std::stoul(*v);
    if (auto v = get("n_filters")) cfg.n_filters = std::stoul(*v);
    if (auto v = get("pool_time")) cfg.pool_time = split_sizes(*v);
    if (auto v = get("pool_freq_mbe")) cfg.pool_freq_mbe = split_sizes(*v);
    if (auto v = get("pool_freq_domfreq")) cfg.pool_freq_domfreq = split_sizes(*v);
    if (auto v = get("rnn_layers")) cfg.rnn_layers = std::stoul(*v);
    if (auto v = get("rnn_units")) cfg.rnn_units = std::stoul(*v);
    if (auto v = get("fc_layers")) cfg.fc_layers = std::stoul(*v);
    if (auto v = get("fc_units")) cfg.fc_units = std::stoul(*v);
    if (auto v = get("fc_activation")) cfg.fc_activation = parse_activation(*v);
    if (auto v = get("maxout_pieces")) cfg.maxout_pieces = std::stoul(*v);
    if (auto v = get("dropout")) cfg.dropout = std::stod(*v);
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("bad model config value: ") + e.what());
  }
  return cfg;
}

std::map<std::string, std::string> feature_config_to_map(const FeatureConfig& cfg) {
  return {
      {"frame_len_ms", fmt_double(cfg.frame_len_ms)},
      {"hop_ms", fmt_double(cfg.hop_ms)},
      {"fft_size", std::to_string(cfg.fft_size)},
      {"n_mels", std::to_string(cfg.n_mels)},
      {"mel_fmin", fmt_double(cfg.mel_fmin)},
      {"mel_fmax", fmt_double(cfg.mel_fmax)},
      {"domfreq_k", std::to_string(cfg.domfreq_k)},
      {"domfreq_fmin", fmt_double(cfg.domfreq_fmin)},
      {"domfreq_fmax", fmt_double(cfg.domfreq_fmax)},
      {"peak_threshold_ratio", fmt_double(cfg.peak_threshold_ratio)},
      {"band_limited", cfg.band_limited ? "true" : "false"},
      {"band_fmin", fmt_double(cfg.band_fmin)},
      {"band_fmax", fmt_double(cfg.band_fmax)},
      {"log_floor", fmt_double(cfg.log_floor)},
  };
}

FeatureConfig feature_config_from_map(const std::map<std::string, std::string>& kv) {
  FeatureConfig cfg;
  auto num = [&](const char* key, double& out) {
    if (auto it = kv.find(key); it != kv.end()) out = std::stod(it->second);
  };
  auto count = [&](const char* key, std::size_t& out) {
    if (auto it = kv.find(key); it != kv.end()) out = std::stoul(it->second);
  };
  try {
    num("frame_len_ms", cfg.frame_len_ms);
    num("hop_ms", cfg.hop_ms);
    count("fft_size", cfg.fft_size);
    count("n_mels", cfg.n_mels);
    num("mel_fmin", cfg.mel_fmin);
    num("mel_fmax", cfg.mel_fmax);
    count("domfreq_k", cfg.domfreq_k);
    num("domfreq_fmin", cfg.domfreq_fmin);
    num("domfreq_fmax", cfg.domfreq_fmax);
    num("peak_threshold_ratio", cfg.peak_threshold_ratio);
    num("band_fmin", cfg.band_fmin);
    num("band_fmax", cfg.band_fmax);
    num("log_floor", cfg.log_floor);
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("feature config: malformed number (") + e.what() + ")");
  }
  if (auto it = kv.find("band_limited"); it != kv.end()) {
    if (it->second == "true" || it->second == "1") cfg.band_limited = true;
    else if (it->second == "false" || it->second == "0") cfg.band_limited = false;
    else throw ConfigError("feature config: band_limited must be true or false");
  }
  return cfg;
}

std::vector<std::uint8_t> encode_checkpoint(const CbrnnModel& model, const Metadata& metadata) {
  Writer w;
  w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kCheckpointVersion);
  std::string text;
  for (const auto& [k, v] : config_to_map(model.config())) text += k + "=" + v + "\n";
  for (const auto& [k, v] : metadata) text += "meta." + k + "=" + v + "\n";
  w.str(text);
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& g : model.parameters()) {
    w.str(g.name);
    w.u64(g.value.size());
    for (double v : g.value) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(model.batchnorm_states().size()));
  for (const auto& s : model.batchnorm_states()) {
    w.u32(static_cast<std::uint32_t>(s.running_mean.size()));
    w.u64(s.updates);
    w.f64(s.momentum);
    w.f64(s.epsilon);
    for (double v : s.running_mean) w.f64(v);
    for (double v : s.running_var) w.f64(v);
  }
  return std::move(w.out);
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CacheError("not a checkpoint (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CacheError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  std::map<std::string, std::string> kv;
  Metadata meta;
  std::istringstream text(r.str());
  std::string line;
  while (std::getline(text, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key.rfind("meta.", 0) == 0) {
      meta[key.substr(5)] = value;
    } else {
      kv[key] = value;
    }
  }
  LoadedCheckpoint out{CbrnnModel(config_from_map(kv), 0), std::move(meta)};
  auto& groups = out.model.parameters();
  const std::uint32_t n_groups = r.u32();
  if (n_groups != groups.size()) {
    throw CacheError("checkpoint has " + std::to_string(n_groups) + " parameter groups; config implies " +
                     std::to_string(groups.size()));
  }
  for (auto& g : groups) {
    std::string name = r.str();
    std::uint64_t count = r.u64();
    if (name != g.name || count != g.value.size()) {
      throw CacheError("checkpoint group '" + name + "' does not match expected '" + g.name + "'");
    }
    for (double& v : g.value) v = r.f64();
  }
  auto& bn = out.model.batchnorm_states();
  const std::uint32_t n_bn = r.u32();
  if (n_bn != bn.size()) throw CacheError("checkpoint batch-norm state count mismatch");
  for (auto& s : bn) {
    const std::uint32_t channels = r.u32();
    if (channels != s.running_mean.size()) throw CacheError("checkpoint batch-norm channel mismatch");
    s.updates = r.u64();
    s.momentum = r.f64();
    s.epsilon = r.f64();
    for (double& v : s.running_mean) v = r.f64();
    for (double& v : s.running_var) v = r.f64();
  }
  if (r.remaining() != 0) throw CacheError("checkpoint has trailing bytes");
  return out;
}

void save_checkpoint(const CbrnnModel& model, const std::filesystem::path& path, const Metadata& metadata) {
  auto bytes = encode_checkpoint(model, metadata);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CacheError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CacheError& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
}

}  // namespace cbrnn
