#include "cbrnn/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "cbrnn/error.hpp"
#include "cbrnn/feature_cache.hpp"

namespace cbrnn {

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(tag.data());
  const std::uint64_t h = fnv1a64({p, tag.size()});
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::filesystem::path cache_file(const std::filesystem::path& cache_dir, const std::string& clip_id) {
  return cache_dir / (clip_id + ".feat");
}

FeatureMap load_features(const Manifest& manifest, const std::filesystem::path& cache_dir) {
  FeatureMap out;
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    const auto path = cache_file(cache_dir, e.clip_id);
    if (!std::filesystem::exists(path)) {
      missing.push_back(e.clip_id);
      continue;
    }
    FeaturePair p = read_feature_cache(path);
    if (p.clip_id != e.clip_id) {
      throw CacheError(path.string() + ": holds clip '" + p.clip_id + "', expected '" + e.clip_id + "'");
    }
    out.emplace(e.clip_id, std::move(p));
  }
  if (!missing.empty()) {
    std::string msg = "missing cached features for " + std::to_string(missing.size()) + " clip(s):";
    for (const auto& id : missing) msg += " " + id;
    throw CacheError(msg);
  }
  return out;
}

namespace {

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

}  // namespace

std::vector<ExtractOutcome> extract_to_cache(const Manifest& manifest, const FeatureConfig& cfg,
                                             const std::filesystem::path& cache_dir, bool force,
                                             std::size_t workers) {
  cfg.validate(kChallengeSampleRate);
  std::filesystem::create_directories(cache_dir);
  std::vector<ExtractOutcome> outcomes(manifest.entries.size());
  parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    auto& o = outcomes[i];
    o.clip_id = e.clip_id;
    const auto path = cache_file(cache_dir, e.clip_id);
    try {
      if (!force && std::filesystem::exists(path)) {
        o.frames = read_feature_cache(path).frames();
        o.status = ExtractStatus::kSkipped;
      } else {
        AudioClip clip = decode_wav(e.path);
        clip.id = e.clip_id;
        FeaturePair pair = extract_features(conform_clip(std::move(clip)), cfg);
        write_feature_cache(pair, path);
        o.frames = pair.frames();
        o.status = ExtractStatus::kExtracted;
      }
      o.hash = hash_file(path);
    } catch (const std::exception& ex) {
      o.status = ExtractStatus::kFailed;
      o.message = ex.what();
    }
  });
  return outcomes;
}

namespace {

const char* status_name(ExtractStatus s) {
  switch (s) {
    case ExtractStatus::kExtracted: return "extracted";
    case ExtractStatus::kSkipped: return "skipped";
    case ExtractStatus::kFailed: return "failed";
  }
  return "failed";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' || c == '\r' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

void write_extraction_reports(const std::filesystem::path& cache_dir, const std::vector<ExtractOutcome>& outcomes) {
  std::ofstream feats(cache_dir / "features.csv");
  std::ofstream report(cache_dir / "extraction_report.csv");
  if (!feats || !report) throw Error("cannot write reports into " + cache_dir.string());
  feats << "clip_id,file,frames,fnv1a64\n";
  report << "clip_id,status,message\n";
  char hex[17];
  for (const auto& o : outcomes) {
    report << csv_field(o.clip_id) << ',' << status_name(o.status) << ',' << csv_field(o.message) << '\n';
    if (o.status == ExtractStatus::kFailed) continue;
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(o.hash));
    feats << csv_field(o.clip_id) << ',' << csv_field(cache_file({}, o.clip_id).string()) << ',' << o.frames << ','
          << hex << '\n';
  }
}

FeaturePair adapt_to_model(const FeaturePair& pair, const CbrnnConfig& cfg) {
  if (!cfg.uses_domfreq() || pair.domfreq.feature() == cfg.domfreq_width) return pair;
  return promote_domfreq_width(pair, cfg.domfreq_width);
}

namespace {

std::vector<LabeledSample> collect(const std::vector<std::string>& ids, const FeatureMap& features,
                                   const Manifest& manifest) {
  std::vector<LabeledSample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    LabeledSample s;
    s.features = features.at(id);
    s.label = manifest.find(id)->label;
    s.provenance.source_a = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<FoldResult> run_protocol(const FeatureMap& features, const Manifest& manifest,
                                     const ProtocolOptions& options) {
  options.split.validate();
  options.train.validate();
  options.model.validate();
  for (const auto& e : manifest.entries) {
    if (!features.count(e.clip_id)) throw CacheError("no features for clip '" + e.clip_id + "'");
  }
  const auto folds = stratified_splits(manifest, options.split);
  std::vector<FoldResult> results(folds.size());

  parallel_for(folds.size(), options.workers, [&](std::size_t k) {
    const std::uint64_t root = options.split.seed;
    FoldResult& r = results[k];
    r.fold = k;
    r.split = folds[k];

    std::mt19937_64 aug_rng(derive_seed(root, "augment", k));
    auto originals = collect(folds[k].train, features, manifest);
    auto train_set = augment_training_set(originals, options.test_pool, options.augment, aug_rng);
    r.train_samples = train_set.size();

    CbrnnConfig cfg = options.model;
    if (cfg.uses_domfreq() && !train_set.empty()) {
      cfg = cfg.with_domfreq_width(train_set.front().features.domfreq.feature());
    }
    auto val_set = collect(folds[k].val, features, manifest);
    for (auto& s : val_set) s.features = adapt_to_model(s.features, cfg);

    TrainConfig tc = options.train;
    tc.seed = derive_seed(root, "train", k);
    TrainHooks hooks;
    if (options.on_epoch) hooks.on_epoch = [&, k](const EpochRecord& rec) { options.on_epoch(k, rec); };
    auto trained = train(build_model(cfg, derive_seed(root, "init", k)), train_set, val_set, tc, hooks);
    r.model = std::move(trained.best_model);
    r.history = std::move(trained.history);

    if (!folds[k].test.empty()) {
      std::vector<FeaturePair> test;
      std::vector<int> labels;
      for (const auto& id : folds[k].test) {
        test.push_back(adapt_to_model(features.at(id), cfg));
        labels.push_back(manifest.find(id)->label == Label::kPresent ? 1 : 0);
      }
      r.test_ids = folds[k].test;
      r.test_scores = r.model.predict(test);
      r.test_auc = rank_auc(r.test_scores, labels);
    }
  });
  return results;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  r.n = values.size();
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

ScoreMap predict_scores(const std::vector<CbrnnModel>& models, const FeatureMap& features) {
  if (models.empty()) throw Error("prediction needs at least one model");
  std::vector<ScoreMap> runs;
  for (const auto& m : models) {
    ScoreMap scores;
    for (const auto& [id, pair] : features) {
      const FeaturePair adapted = adapt_to_model(pair, m.config());
      m.check_input(adapted);
      scores[id] = m.predict(adapted);
    }
    runs.push_back(std::move(scores));
  }
  return ensemble_average(runs);
}

}  // namespace cbrnn
