#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "cbrnn/checkpoint.hpp"
#include "cbrnn/error.hpp"

namespace cbrnn::cli {
namespace {

using Section = std::map<std::string, std::string>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size() || v.starts_with('-')) throw std::invalid_argument(v);
    return n;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

void check_keys(const std::string& section, const Section& given, const Section& known) {
  for (const auto& [k, v] : given) {
    if (!known.count(k)) throw ConfigError("config: unknown key '" + k + "' in [" + section + "]");
  }
}

Section train_section(const TrainConfig& t) {
  return {{"max_epochs", std::to_string(t.max_epochs)},   {"patience", std::to_string(t.patience)},
          {"batch_size", std::to_string(t.batch_size)},   {"learning_rate", fmt(t.adam.learning_rate)},
          {"beta1", fmt(t.adam.beta1)},                   {"beta2", fmt(t.adam.beta2)},
          {"epsilon", fmt(t.adam.epsilon)},               {"shuffle", t.shuffle ? "true" : "false"}};
}

}  // namespace

std::string to_string(Protocol p) { return p == Protocol::kDev ? "dev" : "challenge"; }

std::map<std::string, Section> to_sections(const RunConfig& cfg) {
  std::map<std::string, Section> s;
  s["paths"] = {{"manifest", cfg.paths.manifest.string()},
                {"audio_dir", cfg.paths.audio_dir.string()},
                {"cache_dir", cfg.paths.cache_dir.string()},
                {"out_dir", cfg.paths.out_dir.string()},
                {"test_manifest", cfg.paths.test_manifest.string()}};
  s["features"] = feature_config_to_map(cfg.features);
  s["model"] = config_to_map(cfg.model);
  s["train"] = train_section(cfg.train);
  s["augment"] = {{"blocks_mixing", cfg.augment.blocks_mixing ? "true" : "false"},
                  {"test_mixing", cfg.augment.test_mixing ? "true" : "false"},
                  {"allow_combined", cfg.augment.allow_combined ? "true" : "false"}};
  s["run"] = {{"protocol", to_string(cfg.protocol)},
              {"seed", std::to_string(cfg.seed)},
              {"workers", std::to_string(cfg.workers)}};
  return s;
}

void apply_ini(RunConfig& cfg, const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto known = to_sections(RunConfig{});
  std::map<std::string, Section> given;
  for (const auto& [name, child] : tree) {
    if (!known.count(name)) throw ConfigError("config: unknown section [" + name + "]");
    if (child.empty() && !child.data().empty()) {
      throw ConfigError("config: key '" + name + "' must live inside a section");
    }
    for (const auto& [k, v] : child) given[name][k] = v.data();
    check_keys(name, given[name], known.at(name));
  }

  if (auto it = given.find("paths"); it != given.end()) {
    const auto& p = it->second;
    if (p.count("manifest")) cfg.paths.manifest = p.at("manifest");
    if (p.count("audio_dir")) cfg.paths.audio_dir = p.at("audio_dir");
    if (p.count("cache_dir")) cfg.paths.cache_dir = p.at("cache_dir");
    if (p.count("out_dir")) cfg.paths.out_dir = p.at("out_dir");
    if (p.count("test_manifest")) cfg.paths.test_manifest = p.at("test_manifest");
  }
  if (auto it = given.find("features"); it != given.end()) {
    auto merged = feature_config_to_map(cfg.features);
    for (const auto& [k, v] : it->second) merged[k] = v;
    cfg.features = feature_config_from_map(merged);
  }
  if (auto it = given.find("model"); it != given.end()) {
    const auto& m = it->second;
    auto merged = config_to_map(cfg.model);
    for (const auto& [k, v] : m) merged[k] = v;
    const bool pools = m.count("pool_time") || m.count("pool_freq_mbe") || m.count("pool_freq_domfreq");
    if (!pools && m.count("n_cnn_layers")) {
      for (const char* k : {"n_cnn_layers", "pool_time", "pool_freq_mbe", "pool_freq_domfreq"}) merged.erase(k);
      cfg.model = config_from_map(merged).with_cnn_layers(parse_u64("model.n_cnn_layers", m.at("n_cnn_layers")));
    } else {
      cfg.model = config_from_map(merged);
    }
    cfg.explicit_pooling = cfg.explicit_pooling || pools;
  }
  if (auto it = given.find("train"); it != given.end()) {
    const auto& t = it->second;
    if (t.count("max_epochs")) cfg.train.max_epochs = parse_u64("train.max_epochs", t.at("max_epochs"));
    if (t.count("patience")) cfg.train.patience = parse_u64("train.patience", t.at("patience"));
    if (t.count("batch_size")) cfg.train.batch_size = parse_u64("train.batch_size", t.at("batch_size"));
    if (t.count("learning_rate")) cfg.train.adam.learning_rate = parse_double("train.learning_rate", t.at("learning_rate"));
    if (t.count("beta1")) cfg.train.adam.beta1 = parse_double("train.beta1", t.at("beta1"));
    if (t.count("beta2")) cfg.train.adam.beta2 = parse_double("train.beta2", t.at("beta2"));
    if (t.count("epsilon")) cfg.train.adam.epsilon = parse_double("train.epsilon", t.at("epsilon"));
    if (t.count("shuffle")) cfg.train.shuffle = parse_bool("train.shuffle", t.at("shuffle"));
  }
  if (auto it = given.find("augment"); it != given.end()) {
    const auto& a = it->second;
    if (a.count("blocks_mixing")) cfg.augment.blocks_mixing = parse_bool("augment.blocks_mixing", a.at("blocks_mixing"));
    if (a.count("test_mixing")) cfg.augment.test_mixing = parse_bool("augment.test_mixing", a.at("test_mixing"));
    if (a.count("allow_combined")) cfg.augment.allow_combined = parse_bool("augment.allow_combined", a.at("allow_combined"));
  }
  if (auto it = given.find("run"); it != given.end()) {
    const auto& r = it->second;
    if (r.count("protocol")) {
      const auto& v = r.at("protocol");
      if (v == "dev") cfg.protocol = Protocol::kDev;
      else if (v == "challenge") cfg.protocol = Protocol::kChallenge;
      else throw ConfigError("run.protocol: expected dev or challenge, got '" + v + "'");
    }
    if (r.count("seed")) cfg.seed = parse_u64("run.seed", r.at("seed"));
    if (r.count("workers")) cfg.workers = parse_u64("run.workers", r.at("workers"));
  }
}

void write_ini(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  bool first = true;
  for (const auto& [section, keys] : to_sections(cfg)) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [k, v] : keys) out << k << " = " << v << '\n';
  }
}

CbrnnConfig fit_model_to_input(const RunConfig& cfg, const FeaturePair& sample) {
  CbrnnConfig m = cfg.model;
  m.frames = sample.mbe.time();
  m.mbe_bands = sample.mbe.feature();
  m.domfreq_width = sample.domfreq.feature();
  if (!cfg.explicit_pooling) m = m.with_cnn_layers(m.n_cnn_layers);
  m.validate();
  return m;
}

}  // namespace cbrnn::cli
