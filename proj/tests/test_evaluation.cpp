#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cbrnn/error.hpp"
#include "cbrnn/evaluation.hpp"
#include "support/oracles.hpp"

namespace cbrnn {
namespace {

TEST(Auc, PerfectSeparation) {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(rank_auc(s, y), 1.0);
}

TEST(Auc, AllTiesGiveOneHalf) {
  std::vector<double> s(6, 0.3);
  std::vector<int> y{0, 1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(rank_auc(s, y), 0.5);
}

TEST(Auc, FourSampleExample) {
  std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  std::vector<int> y{0, 0, 1, 1};
  // pairs: (0.35,0.1) win, (0.35,0.4) loss, (0.8,0.1) win, (0.8,0.4) win
  EXPECT_DOUBLE_EQ(oracle::pairwise_auc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(rank_auc(s, y), 0.75);
}

TEST(Auc, SingleClassThrows) {
  std::vector<double> s{0.1, 0.2};
  std::vector<int> y{1, 1};
  EXPECT_THROW(roc_auc(s, y), Error);
}

TEST(Auc, MatchesPairwiseOracleAndTrapezoidOnRandomInstances) {
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> len(2, 500);
    const std::size_t n = len(rng);
    const bool ties = trial % 2 == 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? coarse(rng) / 10.0 : u(rng);
      y[i] = static_cast<int>(i % 2);
    }
    std::shuffle(y.begin(), y.end(), rng);
    auto r = roc_auc(s, y);
    EXPECT_NEAR(r.auc, oracle::pairwise_auc(s, y), 1e-12);
    EXPECT_NEAR(trapezoid_area(r.roc_points), r.auc, 1e-12);
    ASSERT_GE(r.roc_points.size(), 2u);
    EXPECT_EQ(r.roc_points.front().fpr, 0.0);
    EXPECT_EQ(r.roc_points.front().tpr, 0.0);
    EXPECT_EQ(r.roc_points.back().fpr, 1.0);
    EXPECT_EQ(r.roc_points.back().tpr, 1.0);
    for (std::size_t i = 1; i < r.roc_points.size(); ++i) {
      EXPECT_GE(r.roc_points[i].fpr, r.roc_points[i - 1].fpr);
      EXPECT_GE(r.roc_points[i].tpr, r.roc_points[i - 1].tpr);
    }
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(300);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = n(rng);
    y[i] = n(rng) + 0.5 * s[i] > 0 ? 1 : 0;
  }
  const double base = rank_auc(s, y);
  std::vector<double> t(s.size());
  std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3.0 * v) + 7.0; });
  EXPECT_EQ(rank_auc(t, y), base);
  std::transform(s.begin(), s.end(), t.begin(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  EXPECT_NEAR(rank_auc(t, y), base, 1e-15);
}

TEST(Auc, LabelSwapAntisymmetry) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(101);
  std::vector<int> y(101), flipped(101);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.4 ? 1 : 0;
    flipped[i] = 1 - y[i];
  }
  EXPECT_NEAR(rank_auc(s, flipped), 1.0 - rank_auc(s, y), 1e-12);
}

// ---------------------------------------------------------------------------

TEST(ClassifyErrors, AllCorrect) {
  std::vector<std::string> ids{"a", "b", "c"};
  std::vector<double> s{0.9, 0.1, 0.51};
  std::vector<int> y{1, 0, 1};
  auto e = classify_errors(ids, s, y);
  EXPECT_TRUE(e.fp_ids.empty());
  EXPECT_TRUE(e.fn_ids.empty());
}

TEST(ClassifyErrors, ExactThresholdIsAbsent) {
  std::vector<std::string> ids{"a", "b"};
  std::vector<double> s{0.5, 0.5};
  std::vector<int> y{1, 0};
  auto e = classify_errors(ids, s, y);
  EXPECT_EQ(e.fn_ids, std::vector<std::string>{"a"});
  EXPECT_TRUE(e.fp_ids.empty());
}

TEST(ClassifyErrors, CountMatchesRecount) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> ids;
  std::vector<double> s;
  std::vector<int> y;
  std::size_t wrong = 0;
  for (int i = 0; i < 500; ++i) {
    ids.push_back("c" + std::to_string(i));
    s.push_back(u(rng));
    y.push_back(u(rng) < 0.5);
    const bool predicted = s.back() > 0.5;
    wrong += predicted != (y.back() == 1);
  }
  auto e = classify_errors(ids, s, y);
  EXPECT_EQ(e.fp_ids.size() + e.fn_ids.size(), wrong);
}

// ---------------------------------------------------------------------------

Manifest class_manifest(std::size_t present, std::size_t absent) {
  Manifest m;
  for (std::size_t i = 0; i < present + absent; ++i) {
    ManifestEntry e;
    e.clip_id = "clip" + std::to_string(i);
    e.label = i < present ? Label::kPresent : Label::kAbsent;
    m.entries.push_back(e);
  }
  return m;
}

TEST(Splits, FullCorpusSizedValidationPart) {
  auto m = class_manifest(7710, 7980);
  auto folds = stratified_splits(m, SplitSpec::dev_protocol(1));
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) {
    EXPECT_NEAR(static_cast<double>(f.val.size()), 3138.0, 1.0);
  }
}

TEST(Splits, TenSamplesEightyTwenty) {
  auto m = class_manifest(5, 5);
  SplitSpec spec{0.8, 0.2, 0.0, 1, 3, true};
  auto folds = stratified_splits(m, spec);
  ASSERT_EQ(folds.size(), 1u);
  EXPECT_EQ(folds[0].train.size(), 8u);
  EXPECT_EQ(folds[0].val.size(), 2u);
  EXPECT_TRUE(folds[0].test.empty());
  std::size_t pos_train = 0, pos_val = 0;
  for (const auto& id : folds[0].train) pos_train += m.find(id)->label == Label::kPresent;
  for (const auto& id : folds[0].val) pos_val += m.find(id)->label == Label::kPresent;
  EXPECT_EQ(pos_train, 4u);
  EXPECT_EQ(pos_val, 1u);
}

TEST(Splits, DisjointCoversWithBoundedImbalance) {
  auto m = class_manifest(103, 97);
  auto spec = SplitSpec::dev_protocol(11);
  auto folds = stratified_splits(m, spec);
  const double ratios[] = {spec.train, spec.val, spec.test};
  for (const auto& f : folds) {
    std::set<std::string> all;
    const std::vector<std::string>* parts[] = {&f.train, &f.val, &f.test};
    std::size_t total = 0;
    for (int p = 0; p < 3; ++p) {
      total += parts[p]->size();
      all.insert(parts[p]->begin(), parts[p]->end());
      std::size_t pos = 0, neg = 0;
      for (const auto& id : *parts[p]) (m.find(id)->label == Label::kPresent ? pos : neg)++;
      EXPECT_LE(std::abs(pos - 103 * ratios[p]), 1.0);
      EXPECT_LE(std::abs(neg - 97 * ratios[p]), 1.0);
    }
    EXPECT_EQ(total, m.entries.size());
    EXPECT_EQ(all.size(), m.entries.size());
  }
  // Folds differ from each other.
  EXPECT_NE(folds[0].test, folds[1].test);
}

TEST(Splits, SameSeedSameFolds) {
  auto m = class_manifest(30, 30);
  auto a = stratified_splits(m, SplitSpec::challenge_protocol(4));
  auto b = stratified_splits(m, SplitSpec::challenge_protocol(4));
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].train, b[i].train);
    EXPECT_EQ(a[i].val, b[i].val);
  }
}

TEST(Splits, TinyClassRejected) {
  auto m = class_manifest(2, 20);
  EXPECT_THROW(stratified_splits(m, SplitSpec::dev_protocol(0)), Error);
}

TEST(Splits, UnlabeledManifestRejected) {
  auto m = class_manifest(10, 10);
  m.entries[3].label = Label::kUnknown;
  EXPECT_THROW(stratified_splits(m, SplitSpec::dev_protocol(0)), Error);
}

TEST(Splits, LargestRemainder) {
  const double r[] = {0.6, 0.2, 0.2};
  auto parts = allocate_largest_remainder(7, r);
  EXPECT_EQ(parts[0] + parts[1] + parts[2], 7u);
  EXPECT_EQ(parts[0], 4u);
}

// ---------------------------------------------------------------------------

TEST(Ensemble, MeanPerClip) {
  std::vector<ScoreMap> runs{{{"a", 0.2}, {"b", 1.0}}, {{"a", 0.4}, {"b", 1.0}}, {{"a", 0.9}, {"b", 1.0}}};
  auto avg = ensemble_average(runs);
  EXPECT_NEAR(avg.at("a"), 0.5, 1e-15);
  EXPECT_EQ(avg.at("b"), 1.0);
}

TEST(Ensemble, SingleAndIdenticalRunsAreIdentity) {
  ScoreMap one{{"x", 0.3}, {"y", 0.7}};
  std::vector<ScoreMap> single{one};
  EXPECT_EQ(ensemble_average(single), one);
  std::vector<ScoreMap> triple{one, one, one};
  auto avg = ensemble_average(triple);
  for (const auto& [k, v] : one) EXPECT_NEAR(avg.at(k), v, 1e-15);
}

TEST(Ensemble, IdMismatchListsSymmetricDifference) {
  std::vector<ScoreMap> runs{{{"a", 0.1}, {"b", 0.2}}, {{"a", 0.3}, {"c", 0.4}}};
  try {
    ensemble_average(runs);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
}

TEST(Report, FilesAgreeWithAuc) {
  std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  std::vector<double> s{0.9, 0.2, 0.6, 0.4, 0.5};
  std::vector<int> y{1, 0, 0, 1, 1};
  auto report = evaluate(ids, s, y);
  EXPECT_EQ(report.fp_ids, std::vector<std::string>{"c"});
  EXPECT_EQ(report.fn_ids, (std::vector<std::string>{"d", "e"}));
  auto dir = std::filesystem::temp_directory_path() / "cbrnn_report_test";
  std::filesystem::remove_all(dir);
  write_report(dir, ids, s, y, report);
  for (const char* f : {"summary.csv", "decisions.csv", "roc.csv", "errors.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream roc(dir / "roc.csv");
  std::string line;
  std::getline(roc, line);
  std::vector<RocPoint> pts;
  while (std::getline(roc, line)) {
    const auto comma = line.find(',');
    pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  EXPECT_NEAR(trapezoid_area(pts), report.auc, 1e-12);
  std::filesystem::remove_all(dir);
}

TEST(Scores, CsvRoundTrip) {
  ScoreMap m{{"a", 0.123456789012345678}, {"b", 1e-17}};
  auto path = std::filesystem::temp_directory_path() / "cbrnn_scores_test.csv";
  write_scores_csv(path, m);
  EXPECT_EQ(read_scores_csv(path), m);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cbrnn
