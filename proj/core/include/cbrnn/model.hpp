#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cbrnn/features.hpp"
#include "cbrnn/layers.hpp"

namespace cbrnn {

/// Recurrent sequence length after all time pooling.
inline constexpr std::size_t kSequenceSteps = 5;

enum class FeatureSet { kMbe, kDomFreq, kBoth };

std::string to_string(FeatureSet f);
FeatureSet parse_feature_set(const std::string& s);
std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct CbrnnConfig {
  std::size_t frames = 500;
  std::size_t mbe_bands = 40;
  std::size_t domfreq_width = 3;
  FeatureSet features = FeatureSet::kBoth;

  std::size_t n_cnn_layers = 2;
  std::size_t n_filters = 8;
  std::vector<std::size_t> pool_time{10, 10};
  std::vector<std::size_t> pool_freq_mbe{5, 8};
  std::vector<std::size_t> pool_freq_domfreq{3, 1};

  std::size_t rnn_layers = 1;
  std::size_t rnn_units = 8;
  std::size_t fc_layers = 1;
  std::size_t fc_units = 8;
  Activation fc_activation = Activation::kLinear;
  std::size_t maxout_pieces = 2;
  double dropout = 0.25;

  bool uses_mbe() const { return features != FeatureSet::kDomFreq; }
  bool uses_domfreq() const { return features != FeatureSet::kMbe; }

  /// Throws ConfigError naming the offending field or axis.
  void validate() const;

  /// Dom-freq width 6 (blocks- or test-mixed inputs) uses frequency pooling [3, 2].
  CbrnnConfig with_domfreq_width(std::size_t width) const;

  /// Same network with `layers` CNN layers and an evenly split pooling schedule.
  CbrnnConfig with_cnn_layers(std::size_t layers) const;

  friend bool operator==(const CbrnnConfig&, const CbrnnConfig&) = default;
};

/// Splits `total` into `layers` integer factors whose product is `total`,
/// largest prime factors placed first, e.g. (100, 2) -> {10, 10}, (40, 2) -> {5, 8}.
std::vector<std::size_t> split_pool_factors(std::size_t total, std::size_t layers);

struct ParameterGroup {
  std::string name;
  std::vector<double> value;
};

using Gradients = std::vector<std::vector<double>>;

/// Stacked CNN branches (one per feature class), multiplicative merge,
/// bidirectional GRU, time-distributed dense and a maxout-sigmoid head.
/// Copyable value type; a copy is an independent snapshot.
class CbrnnModel {
 public:
  struct Trace;

  CbrnnModel() = default;
  CbrnnModel(const CbrnnConfig& cfg, std::uint64_t seed);

  const CbrnnConfig& config() const { return cfg_; }
  std::size_t parameter_count() const;

  std::vector<ParameterGroup>& parameters() { return params_; }
  const std::vector<ParameterGroup>& parameters() const { return params_; }
  std::vector<BatchNormState>& batchnorm_states() { return bn_; }
  const std::vector<BatchNormState>& batchnorm_states() const { return bn_; }
  const ParameterGroup* find(const std::string& name) const;

  Gradients zero_gradients() const;

  /// Train-mode forward over a mini-batch. Updates batch-norm running
  /// statistics and draws dropout masks from `rng`. Fills `trace` for backward.
  std::vector<double> forward_train(std::span<const FeaturePair* const> batch, std::mt19937_64& rng,
                                    Trace& trace);

  /// Parameter gradients of sum_b grad_probability[b] * p_b.
  Gradients backward(const Trace& trace, std::span<const double> grad_probability) const;

  /// Infer mode: dropout off, running batch-norm statistics. Pure.
  double predict(const FeaturePair& pair) const;
  std::vector<double> predict(std::span<const FeaturePair> pairs) const;

  /// Throws ShapeError naming the branch whose input does not match the config.
  void check_input(const FeaturePair& pair) const;

 private:
  struct ConvLayer {
    std::size_t kernel, bias, gamma, beta, bn_state;
    std::size_t pool_t, pool_f;
  };
  struct Branch {
    std::vector<ConvLayer> layers;
  };
  struct GruLayer {
    GruShape shape;
    std::size_t fwd_w, fwd_u, fwd_b, bwd_w, bwd_u, bwd_b;
  };
  struct DenseLayer {
    std::size_t in, out, weight, bias;
  };

  std::size_t add_group(std::string name, std::size_t size);
  Branch build_branch(const std::string& prefix, std::size_t in_channels,
                      const std::vector<std::size_t>& pool_f, std::mt19937_64& rng);
  std::vector<double> run(std::span<const FeaturePair* const> batch, Mode mode, std::mt19937_64* rng,
                          Trace* trace, std::vector<BatchNormState>* bn_update) const;

  CbrnnConfig cfg_;
  std::vector<ParameterGroup> params_;
  std::vector<BatchNormState> bn_;
  Branch mbe_;
  Branch domfreq_;
  std::vector<GruLayer> gru_;
  std::vector<DenseLayer> dense_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

struct CbrnnModel::Trace {
  struct BranchTrace {
    std::vector<std::vector<Tensor>> conv_in;    // [layer][sample]
    std::vector<std::vector<Tensor>> bn_out;     // [layer][sample], pre-activation
    std::vector<BatchNormCache> bn;              // [layer]
    std::vector<std::vector<std::vector<std::size_t>>> argmax;  // [layer][sample]
    std::vector<std::vector<std::vector<double>>> mask;         // [layer][sample]
    std::vector<Tensor> output;                  // [sample]
  };
  struct SampleTrace {
    std::vector<Tensor> gru_in;
    std::vector<BiGruCache> gru_cache;
    std::vector<std::vector<double>> gru_mask;
    std::vector<Tensor> dense_in, dense_out;
    std::vector<std::vector<double>> dense_mask;
    Tensor head_in;
    MaxoutResult head;
  };

  BranchTrace mbe, domfreq;
  std::vector<SampleTrace> samples;
};

CbrnnModel build_model(const CbrnnConfig& cfg, std::uint64_t seed);

}  // namespace cbrnn
