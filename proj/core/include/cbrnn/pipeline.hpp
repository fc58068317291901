#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbrnn/audio.hpp"
#include "cbrnn/augmentation.hpp"
#include "cbrnn/evaluation.hpp"
#include "cbrnn/features.hpp"
#include "cbrnn/model.hpp"
#include "cbrnn/training.hpp"

namespace cbrnn {

/// Independent stream seed for task `index` of kind `tag` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index);

/// Runs fn(0..n-1) on up to `workers` threads. The first exception (by task
/// index) is rethrown after all tasks finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

using FeatureMap = std::map<std::string, FeaturePair>;

std::filesystem::path cache_file(const std::filesystem::path& cache_dir, const std::string& clip_id);

/// Reads the cached features of every manifest entry. Throws CacheError
/// listing all missing ids.
FeatureMap load_features(const Manifest& manifest, const std::filesystem::path& cache_dir);

enum class ExtractStatus { kExtracted, kSkipped, kFailed };

struct ExtractOutcome {
  std::string clip_id;
  ExtractStatus status = ExtractStatus::kFailed;
  std::string message;
  std::uint64_t hash = 0;
  std::size_t frames = 0;
};

/// Decodes, conforms and featurizes each clip into `cache_dir`. Existing
/// cache files are kept unless `force`. Failures are reported, not thrown.
std::vector<ExtractOutcome> extract_to_cache(const Manifest& manifest, const FeatureConfig& cfg,
                                             const std::filesystem::path& cache_dir, bool force,
                                             std::size_t workers);

/// Writes features.csv (clip_id,file,frames,fnv1a64) and
/// extraction_report.csv (clip_id,status,message).
void write_extraction_reports(const std::filesystem::path& cache_dir, const std::vector<ExtractOutcome>& outcomes);

/// Pads a pair to the dom-freq width a model expects (repeating slots).
FeaturePair adapt_to_model(const FeaturePair& pair, const CbrnnConfig& cfg);

struct ProtocolOptions {
  SplitSpec split = SplitSpec::dev_protocol();
  CbrnnConfig model;
  TrainConfig train;
  AugmentOptions augment;
  /// Unlabeled clips used as mixing partners for test mixing.
  std::vector<FeaturePair> test_pool;
  std::size_t workers = 1;
  /// Called from worker threads.
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
};

struct FoldResult {
  std::size_t fold = 0;
  Fold split;
  CbrnnModel model;
  TrainHistory history;
  std::size_t train_samples = 0;
  std::vector<std::string> test_ids;
  std::vector<double> test_scores;
  std::optional<double> test_auc;
};

/// Split, augment, train and score every fold. Per-fold randomness is
/// derived from the split seed so results do not depend on `workers`.
std::vector<FoldResult> run_protocol(const FeatureMap& features, const Manifest& manifest,
                                     const ProtocolOptions& options);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Population standard deviation.
MeanStd mean_std(const std::vector<double>& values);

/// Ensemble-averaged infer-mode scores of `models` over `features`.
ScoreMap predict_scores(const std::vector<CbrnnModel>& models, const FeatureMap& features);

}  // namespace cbrnn
