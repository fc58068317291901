#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cbrnn/augmentation.hpp"
#include "cbrnn/model.hpp"

namespace cbrnn {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// mean((p - y)^2) and its gradient 2 (p - y) / n.
LossResult mse_loss(std::span<const double> predictions, std::span<const double> labels);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update at step t >= 1. Throws on a non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, std::size_t t,
               const AdamConfig& cfg);

class AdamOptimizer {
 public:
  AdamOptimizer(const CbrnnModel& model, AdamConfig cfg);
  void step(CbrnnModel& model, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamMoments> state_;
  std::size_t t_ = 0;
};

/// Tracks the best epoch of a maximized metric; strict improvement only.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when `value` improves on the best so far.
  bool observe(std::size_t epoch, double value);
  bool should_stop(std::size_t epoch) const { return seen_ && epoch >= best_epoch_ + patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainHooks {
  /// Replaces the validation AUC computation (epochs are 1-based).
  std::function<double(const CbrnnModel&, std::size_t epoch)> validation_auc;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  CbrnnModel best_model;
  TrainHistory history;
};

double validation_auc(const CbrnnModel& model, std::span<const LabeledSample> val_set);

/// Mini-batch Adam on MSE with per-epoch validation AUC and early stopping.
/// Returns the snapshot from the best validation epoch.
TrainResult train(CbrnnModel model, std::span<const LabeledSample> train_set, std::span<const LabeledSample> val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace cbrnn
