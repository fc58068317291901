#include "cbrnn/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw Error("AUC undefined: need both positive and negative labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j averaged
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw Error("ROC undefined: need both positive and negative labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return pts;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

EvalReport roc_auc(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.auc = rank_auc(scores, labels);
  r.roc_points = roc_curve(scores, labels);
  std::tie(r.n_pos, r.n_neg) = class_counts(labels);
  return r;
}

ErrorLists classify_errors(std::span<const std::string> ids, std::span<const double> scores,
                           std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  if (ids.size() != scores.size()) throw ShapeError("ids and scores differ in length");
  ErrorLists e;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool predicted_present = scores[i] > threshold;
    if (labels[i] == 0 && predicted_present) e.fp_ids.push_back(ids[i]);
    if (labels[i] == 1 && !predicted_present) e.fn_ids.push_back(ids[i]);
  }
  return e;
}

EvalReport evaluate(std::span<const std::string> ids, std::span<const double> scores, std::span<const int> labels,
                    double threshold) {
  EvalReport r = roc_auc(scores, labels);
  auto errors = classify_errors(ids, scores, labels, threshold);
  r.fp_ids = std::move(errors.fp_ids);
  r.fn_ids = std::move(errors.fn_ids);
  r.threshold = threshold;
  return r;
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split ratios must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (folds == 0) throw ConfigError("folds must be >= 1");
  if (!stratified) throw ConfigError("only stratified splits are supported");
}

std::vector<std::size_t> allocate_largest_remainder(std::size_t n, std::span<const double> ratios) {
  std::vector<std::size_t> sizes(ratios.size());
  std::vector<double> frac(ratios.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double quota = static_cast<double>(n) * ratios[i];
    sizes[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    frac[i] = ratios[i] > 0.0 ? quota - static_cast<double>(sizes[i]) : -1.0;
    used += sizes[i];
  }
  std::vector<std::size_t> order(ratios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; used < n; k = (k + 1) % order.size()) {
    if (ratios[order[k]] > 0.0) {
      ++sizes[order[k]];
      ++used;
    }
  }
  return sizes;
}

std::vector<Fold> stratified_splits(const Manifest& manifest, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::string> present, absent;
  for (const auto& e : manifest.entries) {
    if (e.label == Label::kUnknown) throw ManifestError("stratified split needs labels; '" + e.clip_id + "' has none");
    (e.label == Label::kPresent ? present : absent).push_back(e.clip_id);
  }
  const std::array<double, 3> ratios{spec.train, spec.val, spec.test};
  for (const auto* cls : {&present, &absent}) {
    auto sizes = allocate_largest_remainder(cls->size(), ratios);
    for (std::size_t p = 0; p < 3; ++p) {
      if (ratios[p] > 0.0 && sizes[p] == 0) {
        throw ManifestError(std::string("class '") + (cls == &present ? "present" : "absent") + "' has " +
                            std::to_string(cls->size()) + " samples, too few to populate every split part");
      }
    }
  }

  std::vector<Fold> folds;
  for (std::size_t f = 0; f < spec.folds; ++f) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(f)};
    std::mt19937_64 rng(seq);
    Fold fold;
    for (const auto* cls : {&present, &absent}) {
      std::vector<std::string> ids = *cls;
      std::shuffle(ids.begin(), ids.end(), rng);
      auto sizes = allocate_largest_remainder(ids.size(), ratios);
      auto it = ids.begin();
      for (std::size_t p = 0; p < 3; ++p) {
        auto& part = p == 0 ? fold.train : p == 1 ? fold.val : fold.test;
        part.insert(part.end(), it, it + static_cast<std::ptrdiff_t>(sizes[p]));
        it += static_cast<std::ptrdiff_t>(sizes[p]);
      }
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

ScoreMap ensemble_average(std::span<const ScoreMap> runs) {
  if (runs.empty()) throw Error("ensemble_average: no runs");
  const ScoreMap& first = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    std::vector<std::string> diff;
    for (const auto& [id, _] : first) {
      if (!runs[r].count(id)) diff.push_back(id);
    }
    for (const auto& [id, _] : runs[r]) {
      if (!first.count(id)) diff.push_back(id);
    }
    if (!diff.empty()) {
      std::string msg = "ensemble_average: run " + std::to_string(r) + " clip ids differ from run 0:";
      for (const auto& id : diff) msg += " " + id;
      throw Error(msg);
    }
  }
  ScoreMap out;
  for (const auto& [id, _] : first) {
    double sum = 0.0;
    for (const auto& run : runs) sum += run.at(id);
    out[id] = sum / static_cast<double>(runs.size());
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& path, const ScoreMap& scores) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "clip_id,score\n";
  for (const auto& [id, s] : scores) out << id << ',' << fmt(s) << '\n';
}

ScoreMap read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  ScoreMap out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(path.string() + " row " + std::to_string(row) + ": expected clip_id,score");
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::logic_error&) {
      throw Error(path.string() + " row " + std::to_string(row) + ": bad score");
    }
  }
  return out;
}

void write_report(const std::filesystem::path& dir, std::span<const std::string> ids, std::span<const double> scores,
                  std::span<const int> labels, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.csv");
    out << "auc,n_pos,n_neg,threshold,n_fp,n_fn\n"
        << fmt(report.auc) << ',' << report.n_pos << ',' << report.n_neg << ',' << fmt(report.threshold) << ','
        << report.fp_ids.size() << ',' << report.fn_ids.size() << '\n';
  }
  {
    std::ofstream out(dir / "decisions.csv");
    out << "clip_id,score,label,decision\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << ids[i] << ',' << fmt(scores[i]) << ',' << labels[i] << ',' << (scores[i] > report.threshold ? 1 : 0)
          << '\n';
    }
  }
  {
    std::ofstream out(dir / "roc.csv");
    out << "fpr,tpr\n";
    for (const auto& p : report.roc_points) out << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
  }
  {
    std::ofstream out(dir / "errors.csv");
    out << "clip_id,kind\n";
    for (const auto& id : report.fp_ids) out << id << ",FP\n";
    for (const auto& id : report.fn_ids) out << id << ",FN\n";
  }
}

}  // namespace cbrnn
