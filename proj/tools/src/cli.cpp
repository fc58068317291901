#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "cbrnn/checkpoint.hpp"
#include "cbrnn/error.hpp"
#include "cbrnn/evaluation.hpp"
#include "cbrnn/feature_cache.hpp"
#include "cbrnn/pipeline.hpp"
#include "cbrnn/synthetic.hpp"
#include "run_config.hpp"

namespace cbrnn::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kFeatureConfigFile = "feature_config.ini";

struct Flags {
  std::optional<std::string> config, manifest, audio_dir, cache_dir, out, test_manifest, features;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers, max_epochs, patience, batch_size;
  bool band_limited = false;
  bool force = false;
  bool blocks_mixing = false;
  bool test_mixing = false;
  bool allow_combined = false;
  bool dev_protocol = false;
  bool challenge_protocol = false;

  // synth
  std::size_t count = 20;
  std::string prefix = "clip";
  bool unlabeled = false;

  // predict / evaluate
  std::vector<std::string> checkpoints;
  std::optional<std::string> model_dir;
  std::optional<std::string> scores;
  double threshold = 0.5;

  // grid
  std::optional<std::string> grid_file;
  std::vector<std::size_t> g_filters, g_cnn_layers, g_rnn_units, g_rnn_layers, g_fc_units, g_fc_layers;
  std::vector<double> g_dropout;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  cfg.workers = std::max(1u, std::thread::hardware_concurrency());
  if (f.config) apply_ini(cfg, *f.config);
  if (f.manifest) cfg.paths.manifest = *f.manifest;
  if (f.audio_dir) cfg.paths.audio_dir = *f.audio_dir;
  if (f.cache_dir) cfg.paths.cache_dir = *f.cache_dir;
  if (f.out) cfg.paths.out_dir = *f.out;
  if (f.test_manifest) cfg.paths.test_manifest = *f.test_manifest;
  if (f.features) cfg.model.features = parse_feature_set(*f.features);
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = std::max<std::size_t>(1, *f.workers);
  if (f.max_epochs) cfg.train.max_epochs = *f.max_epochs;
  if (f.patience) cfg.train.patience = *f.patience;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  // a short --max-epochs run keeps the configured patience only when it still fits
  if (f.max_epochs && !f.patience && cfg.train.patience >= cfg.train.max_epochs)
    cfg.train.patience = cfg.train.max_epochs - 1;
  if (f.band_limited) cfg.features.band_limited = true;
  if (f.blocks_mixing) cfg.augment.blocks_mixing = true;
  if (f.test_mixing) cfg.augment.test_mixing = true;
  if (f.allow_combined) cfg.augment.allow_combined = true;
  if (f.dev_protocol) cfg.protocol = Protocol::kDev;
  if (f.challenge_protocol) cfg.protocol = Protocol::kChallenge;
  return cfg;
}

const fs::path& require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing ") + what + " (flag or [paths] entry)");
  return p;
}

fs::path audio_dir_of(const RunConfig& cfg) {
  if (!cfg.paths.audio_dir.empty()) return cfg.paths.audio_dir;
  return cfg.paths.manifest.parent_path();
}

Manifest labeled_manifest(const RunConfig& cfg) {
  Manifest m = load_manifest(require_path(cfg.paths.manifest, "manifest"), audio_dir_of(cfg), false);
  if (!m.fully_labeled()) throw ManifestError(cfg.paths.manifest.string() + ": every row needs a hasbird label");
  return m;
}

SplitSpec split_spec(const RunConfig& cfg) {
  return cfg.protocol == Protocol::kDev ? SplitSpec::dev_protocol(cfg.seed) : SplitSpec::challenge_protocol(cfg.seed);
}

void write_feature_config(const fs::path& dir, const FeatureConfig& fc) {
  std::ofstream out(dir / kFeatureConfigFile);
  if (!out) throw Error("cannot write " + (dir / kFeatureConfigFile).string());
  out << "[features]\n";
  for (const auto& [k, v] : feature_config_to_map(fc)) out << k << " = " << v << '\n';
}

std::optional<std::map<std::string, std::string>> read_feature_config(const fs::path& cache_dir) {
  const fs::path path = cache_dir / kFeatureConfigFile;
  if (!fs::exists(path)) return std::nullopt;
  boost::property_tree::ptree tree;
  boost::property_tree::ini_parser::read_ini(path.string(), tree);
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : tree.get_child("features")) kv[k] = v.data();
  return feature_config_to_map(feature_config_from_map(kv));
}

std::string first_difference(const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
  std::set<std::string> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  for (const auto& k : keys) {
    const auto ia = a.find(k), ib = b.find(k);
    const std::string va = ia == a.end() ? "<unset>" : ia->second;
    const std::string vb = ib == b.end() ? "<unset>" : ib->second;
    if (va != vb) return k + " (" + va + " vs " + vb + ")";
  }
  return {};
}

/// The cache directory's feature config, which must exist and agree with
/// --band-limited when that flag is given.
FeatureConfig cache_feature_config(const RunConfig& cfg, bool band_limited_flag) {
  auto kv = read_feature_config(require_path(cfg.paths.cache_dir, "cache directory"));
  if (!kv) throw CacheError(cfg.paths.cache_dir.string() + ": no " + kFeatureConfigFile + "; run `cbrnn extract` first");
  FeatureConfig fc = feature_config_from_map(*kv);
  if (band_limited_flag && !fc.band_limited) {
    throw ConfigError("--band-limited given but " + cfg.paths.cache_dir.string() +
                      " was extracted without it");
  }
  return fc;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const fs::path dir = require_path(cfg.paths.out_dir, "output directory");
  fs::create_directories(dir);
  Manifest manifest;
  for (auto& item : synthesize_corpus(f.count, cfg.seed)) {
    const std::string id = f.prefix + item.clip.id.substr(4);
    const fs::path wav = dir / (id + ".wav");
    write_wav(wav, item.clip.samples, 1, item.clip.sample_rate);
    manifest.entries.push_back({id, f.unlabeled ? Label::kUnknown : item.label, wav});
  }
  write_manifest(dir / "manifest.csv", manifest);
  write_ini(cfg, dir / "config.ini");
  out << "wrote " << manifest.size() << " clips to " << dir.string() << "\n";
  return 0;
}

int cmd_extract(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const Manifest manifest = load_manifest(require_path(cfg.paths.manifest, "manifest"), audio_dir_of(cfg), false);
  const fs::path cache = require_path(cfg.paths.cache_dir, "cache directory");
  fs::create_directories(cache);
  if (auto existing = read_feature_config(cache); existing && !f.force) {
    const auto diff = first_difference(*existing, feature_config_to_map(cfg.features));
    if (!diff.empty()) {
      throw ConfigError(cache.string() + " holds features from a different config: " + diff + "; rerun with --force");
    }
  }
  const auto outcomes = extract_to_cache(manifest, cfg.features, cache, f.force, cfg.workers);
  write_extraction_reports(cache, outcomes);
  write_feature_config(cache, cfg.features);
  write_ini(cfg, cache / "config.ini");

  std::size_t extracted = 0, skipped = 0, failed = 0;
  for (const auto& o : outcomes) {
    if (o.status == ExtractStatus::kExtracted) ++extracted;
    else if (o.status == ExtractStatus::kSkipped) ++skipped;
    else ++failed;
  }
  out << "extracted " << extracted << ", skipped " << skipped << ", failed " << failed << "\n";
  for (const auto& o : outcomes)
    if (o.status == ExtractStatus::kFailed) out << "  failed: " << o.clip_id << ": " << o.message << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_split(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const Manifest manifest = labeled_manifest(cfg);
  const fs::path dir = require_path(cfg.paths.out_dir, "output directory");
  fs::create_directories(dir);
  const auto folds = stratified_splits(manifest, split_spec(cfg));
  std::ofstream csv(dir / "splits.csv");
  csv << "fold,part,clip_id\n";
  for (std::size_t k = 0; k < folds.size(); ++k) {
    for (const auto& id : folds[k].train) csv << k << ",train," << id << '\n';
    for (const auto& id : folds[k].val) csv << k << ",val," << id << '\n';
    for (const auto& id : folds[k].test) csv << k << ",test," << id << '\n';
  }
  write_ini(cfg, dir / "config.ini");
  out << folds.size() << " folds written to " << (dir / "splits.csv").string() << "\n";
  return 0;
}

struct TrainingInputs {
  Manifest manifest;
  FeatureMap features;
  std::vector<FeaturePair> test_pool;
};

TrainingInputs load_training_inputs(RunConfig& cfg, const Flags& f) {
  TrainingInputs in;
  in.manifest = labeled_manifest(cfg);
  cfg.features = cache_feature_config(cfg, f.band_limited);
  in.features = load_features(in.manifest, cfg.paths.cache_dir);
  if (in.features.empty()) throw ManifestError("manifest is empty");
  if (cfg.augment.test_mixing) {
    if (cfg.paths.test_manifest.empty()) throw ConfigError("--test-mixing needs --test-manifest");
    Manifest tm = load_manifest(cfg.paths.test_manifest, cfg.paths.test_manifest.parent_path(), false);
    for (auto& [id, pair] : load_features(tm, cfg.paths.cache_dir)) in.test_pool.push_back(std::move(pair));
  }
  if (cfg.augment.blocks_mixing && cfg.augment.test_mixing && !cfg.augment.allow_combined) {
    throw ConfigError("--blocks-mixing with --test-mixing performs poorly; pass --allow-combined to run it anyway");
  }
  cfg.model = fit_model_to_input(cfg, in.features.begin()->second);
  return in;
}

ProtocolOptions protocol_options(const RunConfig& cfg, const TrainingInputs& in) {
  ProtocolOptions opt;
  opt.split = split_spec(cfg);
  opt.model = cfg.model;
  opt.train = cfg.train;
  opt.augment = cfg.augment;
  opt.test_pool = in.test_pool;
  opt.workers = cfg.workers;
  return opt;
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const fs::path dir = require_path(cfg.paths.out_dir, "output directory");
  TrainingInputs in = load_training_inputs(cfg, f);
  fs::create_directories(dir);
  write_ini(cfg, dir / "config.ini");

  const auto results = run_protocol(in.features, in.manifest, protocol_options(cfg, in));

  std::ofstream summary(dir / "summary.csv");
  summary << "fold,train_samples,epochs,best_epoch,best_val_auc,test_auc,checkpoint\n";
  std::vector<double> test_aucs;
  for (const auto& r : results) {
    const fs::path fold_dir = dir / ("fold" + std::to_string(r.fold));
    fs::create_directories(fold_dir);
    Metadata meta{{"fold", std::to_string(r.fold)},
                  {"protocol", to_string(cfg.protocol)},
                  {"seed", std::to_string(cfg.seed)},
                  {"best_epoch", std::to_string(r.history.best_epoch)},
                  {"best_val_auc", fmt(r.history.best_val_auc, 17)}};
    for (const auto& [k, v] : feature_config_to_map(cfg.features)) meta["feature." + k] = v;
    save_checkpoint(r.model, fold_dir / "model.ckpt", meta);
    r.history.write_csv(fold_dir / "history.csv");
    if (!r.test_ids.empty()) {
      ScoreMap scores;
      for (std::size_t i = 0; i < r.test_ids.size(); ++i) scores[r.test_ids[i]] = r.test_scores[i];
      write_scores_csv(fold_dir / "test_scores.csv", scores);
    }
    summary << r.fold << ',' << r.train_samples << ',' << r.history.epochs.size() << ',' << r.history.best_epoch
            << ',' << fmt(r.history.best_val_auc) << ',' << (r.test_auc ? fmt(*r.test_auc) : "") << ','
            << (fs::path("fold" + std::to_string(r.fold)) / "model.ckpt").string() << '\n';
    if (r.test_auc) test_aucs.push_back(*r.test_auc);
    out << "fold " << r.fold << ": best epoch " << r.history.best_epoch << ", val AUC "
        << fmt(r.history.best_val_auc, 4);
    if (r.test_auc) out << ", test AUC " << fmt(*r.test_auc, 4);
    out << "\n";
  }

  std::ofstream text(dir / "summary.txt");
  text << "protocol: " << to_string(cfg.protocol) << "\nfolds: " << results.size()
       << "\nparameters: " << results.front().model.parameter_count() << "\n";
  if (!test_aucs.empty()) {
    const auto ms = mean_std(test_aucs);
    text << "mean_test_auc: " << fmt(ms.mean) << "\nstd_test_auc: " << fmt(ms.stddev) << "\n";
    out << "mean test AUC " << fmt(ms.mean, 4) << " (std " << fmt(ms.stddev, 4) << ") over " << ms.n << " folds\n";
  }
  if (cfg.protocol == Protocol::kChallenge) {
    text << "ensemble: average the scores of all " << results.size()
         << " fold checkpoints (cbrnn predict --model-dir " << dir.string() << ")\n";
    out << "challenge protocol: predictions must be ensemble-averaged over the " << results.size()
        << " checkpoints\n";
  }
  return 0;
}

std::vector<fs::path> checkpoint_paths(const Flags& f) {
  std::vector<fs::path> paths(f.checkpoints.begin(), f.checkpoints.end());
  if (f.model_dir) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(*f.model_dir)) {
      const fs::path ckpt = entry.path() / "model.ckpt";
      if (entry.is_directory() && fs::exists(ckpt)) found.push_back(ckpt);
    }
    std::sort(found.begin(), found.end());
    if (found.empty()) throw Error(*f.model_dir + ": no */model.ckpt found");
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.empty()) throw ConfigError("predict needs --checkpoint or --model-dir");
  return paths;
}

int cmd_predict(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const fs::path target = require_path(cfg.paths.out_dir, "output file (--out)");
  const Manifest manifest = load_manifest(require_path(cfg.paths.manifest, "manifest"), audio_dir_of(cfg), false);
  const FeatureConfig cache_fc = cache_feature_config(cfg, f.band_limited);
  const auto cache_map = feature_config_to_map(cache_fc);

  std::vector<CbrnnModel> models;
  for (const auto& path : checkpoint_paths(f)) {
    LoadedCheckpoint ck = load_checkpoint(path);
    std::map<std::string, std::string> trained;
    for (const auto& [k, v] : ck.metadata)
      if (k.starts_with("feature.")) trained[k.substr(8)] = v;
    if (!trained.empty()) {
      const auto diff = first_difference(trained, cache_map);
      if (!diff.empty()) {
        throw ConfigError(path.string() + " was trained on features that differ from the cache: " + diff);
      }
    }
    models.push_back(std::move(ck.model));
  }
  const FeatureMap features = load_features(manifest, cfg.paths.cache_dir);
  for (const auto& m : models) {
    const auto& pair = features.begin()->second;
    if (pair.frames() != m.config().frames || pair.mbe.feature() != m.config().mbe_bands) {
      throw ConfigError("checkpoint expects " + std::to_string(m.config().frames) + "x" +
                        std::to_string(m.config().mbe_bands) + " MBE input, cache holds " +
                        pair.mbe.shape_string());
    }
  }
  const ScoreMap scores = predict_scores(models, features);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_scores_csv(target, scores);
  out << "scored " << scores.size() << " clips with " << models.size() << " checkpoint(s) -> " << target.string()
      << "\n";
  return 0;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  if (!f.scores) throw ConfigError("evaluate needs --scores");
  const Manifest manifest = labeled_manifest(cfg);
  const fs::path dir = require_path(cfg.paths.out_dir, "output directory");
  const ScoreMap scores = read_scores_csv(*f.scores);

  std::vector<std::string> missing, extra;
  for (const auto& e : manifest.entries)
    if (!scores.count(e.clip_id)) missing.push_back(e.clip_id);
  for (const auto& [id, s] : scores)
    if (!manifest.find(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "score ids do not match the manifest;";
    if (!missing.empty()) {
      msg += " unscored:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (!extra.empty()) {
      msg += " not in manifest:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw ManifestError(msg);
  }

  std::vector<std::string> ids;
  std::vector<double> s;
  std::vector<int> labels;
  for (const auto& e : manifest.entries) {
    ids.push_back(e.clip_id);
    s.push_back(scores.at(e.clip_id));
    labels.push_back(e.label == Label::kPresent ? 1 : 0);
  }
  const EvalReport report = evaluate(ids, s, labels, f.threshold);
  write_report(dir, ids, s, labels, report);
  out << "AUC " << fmt(report.auc) << " (" << report.n_pos << " present, " << report.n_neg << " absent); "
      << report.fp_ids.size() << " false positives, " << report.fn_ids.size() << " false negatives at threshold "
      << report.threshold << "\n";
  return 0;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError("grid." + key + ": bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("grid." + key + ": empty list");
  return out;
}

struct GridAxes {
  std::vector<std::size_t> filters, cnn_layers, rnn_units, rnn_layers, fc_units, fc_layers;
  std::vector<double> dropout;
};

GridAxes grid_axes(const Flags& f, const CbrnnConfig& base) {
  GridAxes g{{base.n_filters}, {base.n_cnn_layers}, {base.rnn_units}, {base.rnn_layers},
             {base.fc_units},  {base.fc_layers},    {base.dropout}};
  if (f.grid_file) {
    boost::property_tree::ptree tree;
    boost::property_tree::ini_parser::read_ini(*f.grid_file, tree);
    for (const auto& [name, child] : tree) {
      if (name != "grid") throw ConfigError("grid file: unknown section [" + name + "]");
      for (const auto& [k, v] : child) {
        const std::string t = v.data();
        if (k == "n_filters") g.filters = parse_list<std::size_t>(k, t);
        else if (k == "n_cnn_layers") g.cnn_layers = parse_list<std::size_t>(k, t);
        else if (k == "rnn_units") g.rnn_units = parse_list<std::size_t>(k, t);
        else if (k == "rnn_layers") g.rnn_layers = parse_list<std::size_t>(k, t);
        else if (k == "fc_units") g.fc_units = parse_list<std::size_t>(k, t);
        else if (k == "fc_layers") g.fc_layers = parse_list<std::size_t>(k, t);
        else if (k == "dropout") g.dropout = parse_list<double>(k, t);
        else throw ConfigError("grid file: unknown key '" + k + "'");
      }
    }
  }
  if (!f.g_filters.empty()) g.filters = f.g_filters;
  if (!f.g_cnn_layers.empty()) g.cnn_layers = f.g_cnn_layers;
  if (!f.g_rnn_units.empty()) g.rnn_units = f.g_rnn_units;
  if (!f.g_rnn_layers.empty()) g.rnn_layers = f.g_rnn_layers;
  if (!f.g_fc_units.empty()) g.fc_units = f.g_fc_units;
  if (!f.g_fc_layers.empty()) g.fc_layers = f.g_fc_layers;
  if (!f.g_dropout.empty()) g.dropout = f.g_dropout;
  return g;
}

int cmd_grid(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  const fs::path dir = require_path(cfg.paths.out_dir, "output directory");
  TrainingInputs in = load_training_inputs(cfg, f);
  fs::create_directories(dir);
  write_ini(cfg, dir / "config.ini");
  const GridAxes g = grid_axes(f, cfg.model);
  const FeaturePair& sample = in.features.begin()->second;

  struct Row {
    std::size_t index;
    CbrnnConfig model;
    std::size_t parameters;
    std::vector<double> val;
    double mean;
  };
  std::vector<Row> rows;
  for (auto layers : g.cnn_layers)
    for (auto filters : g.filters)
      for (auto rnn_layers : g.rnn_layers)
        for (auto rnn_units : g.rnn_units)
          for (auto fc_layers : g.fc_layers)
            for (auto fc_units : g.fc_units)
              for (auto dropout : g.dropout) {
                RunConfig point = cfg;
                point.model.n_cnn_layers = layers;
                point.model.n_filters = filters;
                point.model.rnn_layers = rnn_layers;
                point.model.rnn_units = rnn_units;
                point.model.fc_layers = fc_layers;
                point.model.fc_units = fc_units;
                point.model.dropout = dropout;
                point.explicit_pooling = false;
                point.model = fit_model_to_input(point, sample);

                auto opt = protocol_options(point, in);
                const auto results = run_protocol(in.features, in.manifest, opt);
                Row row{rows.size(), point.model, results.front().model.parameter_count(), {}, 0.0};
                for (const auto& r : results) row.val.push_back(r.history.best_val_auc);
                row.mean = mean_std(row.val).mean;
                out << "config " << row.index << ": " << row.parameters << " parameters, mean val AUC "
                    << fmt(row.mean, 4) << "\n";
                rows.push_back(std::move(row));
              }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.mean > b.mean; });

  std::ofstream csv(dir / "grid.csv");
  csv << "rank,config_hash,n_cnn_layers,n_filters,rnn_layers,rnn_units,fc_layers,fc_units,dropout,parameters";
  const std::size_t folds = rows.empty() ? 0 : rows.front().val.size();
  for (std::size_t k = 0; k < folds; ++k) csv << ",val_auc_fold" << k;
  csv << ",mean_val_auc\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::string text;
    for (const auto& [k, v] : config_to_map(r.model)) text += k + "=" + v + "\n";
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
    csv << i + 1 << ',' << hex64(fnv1a64({bytes, text.size()})) << ',' << r.model.n_cnn_layers << ','
        << r.model.n_filters << ',' << r.model.rnn_layers << ',' << r.model.rnn_units << ',' << r.model.fc_layers
        << ',' << r.model.fc_units << ',' << r.model.dropout << ',' << r.parameters;
    for (double v : r.val) csv << ',' << fmt(v);
    csv << ',' << fmt(r.mean) << '\n';
  }
  out << rows.size() << " configurations written to " << (dir / "grid.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void common_options(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "INI file with [paths] [features] [model] [train] [augment] [run]")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "root random seed");
  cmd->add_option("--workers", f.workers, "worker threads for folds and extraction");
}

void training_options(CLI::App* cmd, Flags& f) {
  cmd->add_option("--manifest", f.manifest, "labeled itemid,hasbird CSV");
  cmd->add_option("--cache-dir", f.cache_dir, "feature cache directory");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--features", f.features, "feature classes: mbe, domfreq or both")
      ->check(CLI::IsMember({"mbe", "domfreq", "both"}));
  auto* dev = cmd->add_flag("--dev-protocol", f.dev_protocol, "5 folds of 60/20/20 (default)");
  auto* ch = cmd->add_flag("--challenge-protocol", f.challenge_protocol, "3 folds of 80/20");
  dev->excludes(ch);
  cmd->add_flag("--blocks-mixing", f.blocks_mixing, "augment by mixing pairs of training clips");
  cmd->add_flag("--test-mixing", f.test_mixing, "mix positive training clips with test clips");
  cmd->add_option("--test-manifest", f.test_manifest, "clips used as test-mixing partners");
  cmd->add_flag("--allow-combined", f.allow_combined, "permit --blocks-mixing together with --test-mixing");
  cmd->add_flag("--band-limited", f.band_limited, "require a cache extracted with --band-limited");
  cmd->add_option("--max-epochs", f.max_epochs, "epoch cap");
  cmd->add_option("--patience", f.patience, "early-stopping patience in epochs");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bird audio detection with stacked convolutional and recurrent networks", "cbrnn"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus of 10 s clips and its manifest");
  common_options(synth, f);
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option("--count", f.count, "number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--prefix", f.prefix, "clip id prefix");
  synth->add_flag("--unlabeled", f.unlabeled, "leave the hasbird column empty");

  auto* extract = app.add_subcommand("extract", "compute and cache features for every clip of a manifest");
  common_options(extract, f);
  extract->add_option("--manifest", f.manifest, "itemid[,hasbird] CSV");
  extract->add_option("--audio-dir", f.audio_dir, "directory holding <itemid>.wav (default: manifest's)");
  extract->add_option("--cache-dir", f.cache_dir, "feature cache directory");
  extract->add_flag("--band-limited", f.band_limited, "restrict features to 3-8 kHz");
  extract->add_flag("--force", f.force, "re-extract clips that are already cached");

  auto* split = app.add_subcommand("split", "write stratified cross-validation folds");
  common_options(split, f);
  split->add_option("--manifest", f.manifest, "labeled itemid,hasbird CSV");
  split->add_option("--out", f.out, "output directory");
  auto* sdev = split->add_flag("--dev-protocol", f.dev_protocol, "5 folds of 60/20/20 (default)");
  auto* sch = split->add_flag("--challenge-protocol", f.challenge_protocol, "3 folds of 80/20");
  sdev->excludes(sch);

  auto* train = app.add_subcommand("train", "train one model per fold");
  common_options(train, f);
  training_options(train, f);

  auto* predict = app.add_subcommand("predict", "ensemble-average checkpoint scores over a manifest");
  common_options(predict, f);
  predict->add_option("--checkpoint", f.checkpoints, "checkpoint file (repeatable)");
  predict->add_option("--model-dir", f.model_dir, "training output directory; uses every fold checkpoint");
  predict->add_option("--manifest", f.manifest, "itemid[,hasbird] CSV");
  predict->add_option("--cache-dir", f.cache_dir, "feature cache directory");
  predict->add_option("--out", f.out, "score CSV to write");
  predict->add_flag("--band-limited", f.band_limited, "require a cache extracted with --band-limited");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "AUC, ROC and error lists for a score CSV");
  common_options(evaluate_cmd, f);
  evaluate_cmd->add_option("--scores", f.scores, "clip_id,score CSV")->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--manifest", f.manifest, "labeled itemid,hasbird CSV");
  evaluate_cmd->add_option("--out", f.out, "report directory");
  evaluate_cmd->add_option("--threshold", f.threshold, "scores above this predict presence");

  auto* grid = app.add_subcommand("grid", "train every configuration of a hyper-parameter grid");
  common_options(grid, f);
  training_options(grid, f);
  grid->add_option("--grid-file", f.grid_file, "INI file with a [grid] section of comma lists")
      ->check(CLI::ExistingFile);
  grid->add_option("--filters", f.g_filters, "CNN filter counts")->delimiter(',');
  grid->add_option("--cnn-layers", f.g_cnn_layers, "CNN layer counts")->delimiter(',');
  grid->add_option("--rnn-units", f.g_rnn_units, "GRU units per direction")->delimiter(',');
  grid->add_option("--rnn-layers", f.g_rnn_layers, "GRU layer counts")->delimiter(',');
  grid->add_option("--fc-units", f.g_fc_units, "dense units")->delimiter(',');
  grid->add_option("--fc-layers", f.g_fc_layers, "dense layer counts")->delimiter(',');
  grid->add_option("--dropout", f.g_dropout, "dropout rates")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (synth->parsed()) return cmd_synth(f, out);
    if (extract->parsed()) return cmd_extract(f, out);
    if (split->parsed()) return cmd_split(f, out);
    if (train->parsed()) return cmd_train(f, out);
    if (predict->parsed()) return cmd_predict(f, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(f, out);
    if (grid->parsed()) return cmd_grid(f, out);
  } catch (const std::exception& e) {
    err << "cbrnn: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cbrnn::cli
