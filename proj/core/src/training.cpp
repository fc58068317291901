#include "cbrnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cbrnn/error.hpp"
#include "cbrnn/evaluation.hpp"

namespace cbrnn {

void TrainConfig::validate() const {
  if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
  if (patience >= max_epochs) throw ConfigError("patience must be smaller than max_epochs");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for batch normalization");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

LossResult mse_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.empty()) throw Error("mse_loss: empty batch");
  if (predictions.size() != labels.size()) throw ShapeError("mse_loss: predictions and labels differ in length");
  const double n = static_cast<double>(predictions.size());
  LossResult r;
  r.gradient.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - labels[i];
    r.loss += d * d;
    r.gradient[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, std::size_t t,
               const AdamConfig& cfg) {
  if (t == 0) throw Error("adam_step: step index starts at 1");
  if (state.m.size() != params.size()) state.m.assign(params.size(), 0.0);
  if (state.v.size() != params.size()) state.v.assign(params.size(), 0.0);
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error("adam_step: non-finite gradient");
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(const CbrnnModel& model, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& g : model.parameters()) {
    state_.push_back({std::vector<double>(g.value.size(), 0.0), std::vector<double>(g.value.size(), 0.0)});
  }
}

void AdamOptimizer::step(CbrnnModel& model, const Gradients& grads) {
  ++t_;
  auto& groups = model.parameters();
  for (std::size_t i = 0; i < groups.size(); ++i) adam_step(groups[i].value, grads[i], state_[i], t_, cfg_);
}

bool EarlyStopping::observe(std::size_t epoch, double value) {
  if (!seen_ || value > best_) {
    seen_ = true;
    best_ = value;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,val_auc\n";
  for (const auto& e : epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_auc << '\n';
}

double validation_auc(const CbrnnModel& model, std::span<const LabeledSample> val_set) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(val_set.size());
  labels.reserve(val_set.size());
  for (const auto& s : val_set) {
    scores.push_back(model.predict(s.features));
    labels.push_back(s.label == Label::kPresent ? 1 : 0);
  }
  return rank_auc(scores, labels);
}

TrainResult train(CbrnnModel model, std::span<const LabeledSample> train_set, std::span<const LabeledSample> val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() < 2) throw Error("training set needs at least 2 samples");
  if (val_set.empty()) throw Error("validation set is empty");
  std::size_t val_pos = 0;
  for (const auto& s : val_set) {
    if (s.label == Label::kUnknown) throw Error("validation sample '" + s.features.clip_id + "' is unlabeled");
    val_pos += s.label == Label::kPresent;
  }
  if (!hooks.validation_auc && (val_pos == 0 || val_pos == val_set.size())) {
    throw Error("validation AUC undefined: validation set holds a single class");
  }
  for (const auto& s : train_set) {
    if (s.label == Label::kUnknown) throw Error("training sample '" + s.features.clip_id + "' is unlabeled");
    model.check_input(s.features);
  }
  for (const auto& s : val_set) model.check_input(s.features);

  std::mt19937_64 rng(cfg.seed);
  AdamOptimizer adam(model, cfg.adam);
  EarlyStopping stopper(cfg.patience);
  TrainResult result{model, {}};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  CbrnnModel::Trace trace;
  std::vector<const FeaturePair*> batch;
  std::vector<double> targets;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < 2) break;
      batch.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train_set[order[i]];
        batch.push_back(&s.features);
        targets.push_back(s.label == Label::kPresent ? 1.0 : 0.0);
      }
      auto probs = model.forward_train(batch, rng, trace);
      auto loss = mse_loss(probs, targets);
      adam.step(model, model.backward(trace, loss.gradient));
      loss_sum += loss.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.val_auc = hooks.validation_auc ? hooks.validation_auc(model, epoch) : validation_auc(model, val_set);
    result.history.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (stopper.observe(epoch, rec.val_auc)) result.best_model = model;
    if (stopper.should_stop(epoch)) break;
  }
  result.history.best_epoch = stopper.best_epoch();
  result.history.best_val_auc = stopper.best_value();
  return result;
}

}  // namespace cbrnn
