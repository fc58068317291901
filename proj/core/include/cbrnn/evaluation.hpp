#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cbrnn/audio.hpp"

namespace cbrnn {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  std::vector<RocPoint> roc_points;
  std::vector<std::string> fp_ids;
  std::vector<std::string> fn_ids;
  double threshold = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

/// Mann-Whitney rank statistic with average ranks for ties:
/// P(score_pos > score_neg) + 0.5 P(tie). Labels are 0/1.
double rank_auc(std::span<const double> scores, std::span<const int> labels);

/// ROC curve from (0,0) to (1,1), one vertex per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> points);

/// AUC plus ROC points. Throws if either class is missing.
EvalReport roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ErrorLists {
  std::vector<std::string> fp_ids;
  std::vector<std::string> fn_ids;
};

/// A score strictly above `threshold` predicts presence.
ErrorLists classify_errors(std::span<const std::string> ids, std::span<const double> scores,
                           std::span<const int> labels, double threshold = 0.5);

EvalReport evaluate(std::span<const std::string> ids, std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool stratified = true;

  static SplitSpec dev_protocol(std::uint64_t seed = 0) { return {0.6, 0.2, 0.2, 5, seed, true}; }
  static SplitSpec challenge_protocol(std::uint64_t seed = 0) { return {0.8, 0.2, 0.0, 3, seed, true}; }
  void validate() const;
};

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Each fold independently shuffles each class (seeded by seed and fold
/// index) and cuts it by the ratios with largest-remainder rounding.
std::vector<Fold> stratified_splits(const Manifest& manifest, const SplitSpec& spec);

/// Part sizes for `n` items; sums to n, each within 1 of n * ratio.
std::vector<std::size_t> allocate_largest_remainder(std::size_t n, std::span<const double> ratios);

using ScoreMap = std::map<std::string, double>;

ScoreMap ensemble_average(std::span<const ScoreMap> runs);

void write_scores_csv(const std::filesystem::path& path, const ScoreMap& scores);
ScoreMap read_scores_csv(const std::filesystem::path& path);

/// Writes summary.csv, decisions.csv, roc.csv and errors.csv into `dir`.
void write_report(const std::filesystem::path& dir, std::span<const std::string> ids, std::span<const double> scores,
                  std::span<const int> labels, const EvalReport& report);

}  // namespace cbrnn
