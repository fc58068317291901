#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cbrnn/error.hpp"
#include "cbrnn/gradcheck.hpp"
#include "cbrnn/training.hpp"
#include "support/fixtures.hpp"

namespace cbrnn {
namespace {

using testing_support::class_pair;
using testing_support::tiny_config;

std::vector<LabeledSample> separable_set(const CbrnnConfig& cfg, std::size_t n, std::uint64_t seed,
                                         const std::string& prefix) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool present = i % 2 == 0;
    LabeledSample s;
    s.features = class_pair(cfg, present, seed * 1000 + i, prefix + std::to_string(i));
    s.label = present ? Label::kPresent : Label::kAbsent;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

TEST(MseLoss, PerfectPredictionIsZero) {
  std::vector<double> p{0.0, 1.0, 1.0}, y{0.0, 1.0, 1.0};
  auto r = mse_loss(p, y);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.gradient) EXPECT_EQ(g, 0.0);
}

TEST(MseLoss, SingleSampleArithmetic) {
  std::vector<double> p{0.5}, y{1.0};
  auto r = mse_loss(p, y);
  EXPECT_DOUBLE_EQ(r.loss, 0.25);
  EXPECT_DOUBLE_EQ(r.gradient[0], -1.0);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(17), y(17);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng);
    y[i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  auto r = mse_loss(p, y);
  auto numeric = numeric_gradient([&] { return mse_loss(p, y).loss; }, p);
  EXPECT_LT(relative_error(r.gradient, numeric), 1e-9);
}

TEST(MseLoss, EmptyBatchThrows) {
  std::vector<double> none;
  EXPECT_THROW(mse_loss(none, none), Error);
}

// ---------------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> theta{1.0, -2.0, 3.0}, g(3, 0.0);
  AdamMoments st{std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)};
  adam_step(theta, g, st, 1, AdamConfig{});
  EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> theta{1.0, 1.0}, g{3.7, -0.02};
  AdamMoments st{std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)};
  AdamConfig cfg;
  adam_step(theta, g, st, 1, cfg);
  EXPECT_NEAR(1.0 - theta[0], cfg.learning_rate, 1e-8);
  EXPECT_NEAR(theta[1] - 1.0, cfg.learning_rate, 1e-6);
}

TEST(Adam, QuadraticBowlConverges) {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  std::vector<double> theta{1.0};
  AdamMoments st{{0.0}, {0.0}};
  double prev = 1.0;
  for (std::size_t t = 1; t <= 100; ++t) {
    std::vector<double> g{2.0 * theta[0]};
    adam_step(theta, g, st, t, cfg);
    EXPECT_LT(std::abs(theta[0]), prev) << "step " << t;
    prev = std::abs(theta[0]);
  }
  EXPECT_LT(std::abs(theta[0]), 0.5);
}

TEST(Adam, RejectsStepZeroAndNonFiniteGradient) {
  std::vector<double> theta{1.0};
  AdamMoments st{{0.0}, {0.0}};
  std::vector<double> g{1.0};
  EXPECT_THROW(adam_step(theta, g, st, 0, AdamConfig{}), Error);
  std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(adam_step(theta, bad, st, 1, AdamConfig{}), Error);
}

// ---------------------------------------------------------------------------

TEST(EarlyStopping, StrictImprovementOnly) {
  EarlyStopping es(2);
  EXPECT_TRUE(es.observe(1, 0.6));
  EXPECT_FALSE(es.observe(2, 0.6));
  EXPECT_FALSE(es.should_stop(2));
  EXPECT_TRUE(es.should_stop(3));
  EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.patience, 50u);
  EXPECT_EQ(cfg.max_epochs, 500u);
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_DOUBLE_EQ(cfg.adam.learning_rate, 0.001);
  EXPECT_DOUBLE_EQ(cfg.adam.beta1, 0.9);
  EXPECT_DOUBLE_EQ(cfg.adam.beta2, 0.999);
  EXPECT_DOUBLE_EQ(cfg.adam.epsilon, 1e-8);
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.patience = cfg.max_epochs;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

struct PlateauRun {
  TrainResult result;
  std::vector<CbrnnModel> seen;  // model as evaluated at each epoch
};

// Validation AUC rises to a peak at epoch 3 and then plateaus below it.
PlateauRun run_plateau(std::size_t patience, std::size_t max_epochs) {
  auto cfg = tiny_config();
  auto train_set = separable_set(cfg, 8, 1, "t");
  auto val_set = separable_set(cfg, 4, 2, "v");
  TrainConfig tc;
  tc.patience = patience;
  tc.max_epochs = max_epochs;
  tc.batch_size = 4;
  tc.seed = 3;
  PlateauRun run;
  TrainHooks hooks;
  hooks.validation_auc = [&](const CbrnnModel& m, std::size_t epoch) {
    run.seen.push_back(m);
    const double curve[] = {0.6, 0.7, 0.9};
    return epoch <= 3 ? curve[epoch - 1] : 0.85;
  };
  run.result = train(build_model(cfg, 7), train_set, val_set, tc, hooks);
  return run;
}

TEST(Training, EarlyStoppingDefaultPatienceStopsFiftyAfterPeak) {
  auto run = run_plateau(TrainConfig{}.patience, 500);
  EXPECT_EQ(run.result.history.best_epoch, 3u);
  EXPECT_EQ(run.result.history.epochs.size(), 53u);
  EXPECT_DOUBLE_EQ(run.result.history.best_val_auc, 0.9);
}

TEST(Training, EarlyStoppingReturnsBestEpochSnapshot) {
  auto run = run_plateau(5, 500);
  EXPECT_EQ(run.result.history.epochs.size(), 8u);
  ASSERT_EQ(run.seen.size(), 8u);
  const auto& best = run.seen[2];
  for (std::size_t g = 0; g < best.parameters().size(); ++g) {
    EXPECT_EQ(run.result.best_model.parameters()[g].value, best.parameters()[g].value);
  }
  // Later epochs kept training, so the final model differs from the snapshot.
  EXPECT_NE(run.seen.back().parameters()[0].value, best.parameters()[0].value);
}

TEST(Training, MaxEpochCapHonoredWhileImproving) {
  auto cfg = tiny_config();
  auto train_set = separable_set(cfg, 6, 1, "t");
  auto val_set = separable_set(cfg, 4, 2, "v");
  TrainConfig tc;
  tc.patience = 3;
  tc.max_epochs = 12;
  tc.batch_size = 3;
  TrainHooks hooks;
  hooks.validation_auc = [](const CbrnnModel&, std::size_t epoch) { return 0.5 + 0.01 * epoch; };
  auto r = train(build_model(cfg, 1), train_set, val_set, tc, hooks);
  EXPECT_EQ(r.history.epochs.size(), 12u);
  EXPECT_EQ(r.history.best_epoch, 12u);
}

TEST(Training, SingleClassValidationRejectedBeforeTraining) {
  auto cfg = tiny_config();
  auto train_set = separable_set(cfg, 6, 1, "t");
  auto val_set = separable_set(cfg, 4, 2, "v");
  for (auto& s : val_set) s.label = Label::kPresent;
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.patience = 1;
  EXPECT_THROW(train(build_model(cfg, 1), train_set, val_set, tc), Error);
}

TEST(Training, SameSeedIsBitReproducible) {
  auto cfg = tiny_config();
  cfg.dropout = 0.25;
  auto train_set = separable_set(cfg, 12, 1, "t");
  auto val_set = separable_set(cfg, 6, 2, "v");
  TrainConfig tc;
  tc.max_epochs = 6;
  tc.patience = 5;
  tc.batch_size = 5;  // 12 = 5 + 5 + 2
  tc.seed = 21;
  auto a = train(build_model(cfg, 2), train_set, val_set, tc);
  auto b = train(build_model(cfg, 2), train_set, val_set, tc);
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    EXPECT_EQ(a.history.epochs[e].train_loss, b.history.epochs[e].train_loss);
    EXPECT_EQ(a.history.epochs[e].val_auc, b.history.epochs[e].val_auc);
  }
  for (std::size_t g = 0; g < a.best_model.parameters().size(); ++g) {
    EXPECT_EQ(a.best_model.parameters()[g].value, b.best_model.parameters()[g].value);
  }
}

TEST(Training, ReturnedModelReproducesBestValidationAuc) {
  auto cfg = tiny_config();
  auto train_set = separable_set(cfg, 16, 1, "t");
  auto val_set = separable_set(cfg, 8, 2, "v");
  TrainConfig tc;
  tc.max_epochs = 10;
  tc.patience = 4;
  tc.batch_size = 8;
  auto r = train(build_model(cfg, 3), train_set, val_set, tc);
  EXPECT_EQ(validation_auc(r.best_model, val_set), r.history.best_val_auc);
  EXPECT_LE(r.history.epochs.size(), r.history.best_epoch + tc.patience);
  double best = 0.0;
  for (const auto& e : r.history.epochs) best = std::max(best, e.val_auc);
  EXPECT_EQ(best, r.history.best_val_auc);
}

TEST(Training, LossFallsOverFirstAdamStepsOnFixedBatch) {
  auto cfg = tiny_config();
  auto set = separable_set(cfg, 8, 4, "b");
  auto model = build_model(cfg, 9);
  AdamConfig ac;
  ac.learning_rate = 0.01;
  AdamOptimizer adam(model, ac);
  std::vector<const FeaturePair*> batch;
  std::vector<double> y;
  for (const auto& s : set) {
    batch.push_back(&s.features);
    y.push_back(s.label == Label::kPresent ? 1.0 : 0.0);
  }
  std::mt19937_64 rng(0);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 5; ++step) {
    CbrnnModel::Trace trace;
    auto loss = mse_loss(model.forward_train(batch, rng, trace), y);
    EXPECT_LT(loss.loss, prev) << "step " << step;
    prev = loss.loss;
    adam.step(model, model.backward(trace, loss.gradient));
  }
}

TEST(Training, LearnsSeparableData) {
  auto cfg = tiny_config();
  auto train_set = separable_set(cfg, 40, 1, "t");
  auto val_set = separable_set(cfg, 20, 2, "v");
  TrainConfig tc;
  tc.max_epochs = 40;
  tc.patience = 10;
  tc.batch_size = 8;
  tc.adam.learning_rate = 0.01;
  auto r = train(build_model(cfg, 5), train_set, val_set, tc);
  EXPECT_GE(r.history.best_val_auc, 0.95);
}

TEST(TrainHistory, CsvLayout) {
  TrainHistory h;
  h.epochs = {{1, 0.25, 0.5}, {2, 0.125, 0.75}};
  auto path = std::filesystem::temp_directory_path() / "cbrnn_history_test.csv";
  h.write_csv(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epoch,loss,val_auc");
  EXPECT_EQ(row.substr(0, 2), "1,");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cbrnn
