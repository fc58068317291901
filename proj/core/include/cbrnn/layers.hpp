#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "cbrnn/tensor.hpp"

namespace cbrnn {

enum class Mode { kTrain, kInfer };

// ---------------------------------------------------------------------------
// 3x3 "same" convolution. Weight layout: ((dt * 3 + df) * cin + ci) * cout + co,
// with dt, df in {0, 1, 2} addressing offsets -1, 0, +1.

inline constexpr std::size_t kKernel = 3;

Tensor conv2d_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                      std::size_t out_channels);

/// Accumulates into grad_weight / grad_bias and returns d(loss)/d(input).
Tensor conv2d_backward(const Tensor& input, std::span<const double> weight, const Tensor& grad_out,
                       std::span<double> grad_weight, std::span<double> grad_bias);

// ---------------------------------------------------------------------------

struct PoolResult {
  Tensor output;
  /// Flat input index of the selected element for each output cell.
  std::vector<std::size_t> argmax;
};

PoolResult maxpool2d_forward(const Tensor& input, std::size_t pool_t, std::size_t pool_f);
Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const std::array<std::size_t, 3>& input_dims);

// ---------------------------------------------------------------------------
// Batch normalization over batch x time x feature, one statistic per channel.

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::size_t updates = 0;
  double momentum = 0.99;
  double epsilon = 1e-3;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

struct BatchNormCache {
  std::vector<Tensor> normalized;
  std::vector<double> inv_std;
};

std::vector<Tensor> batchnorm_train_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                            std::span<const double> beta, BatchNormState& state,
                                            BatchNormCache* cache);
/// Throws if the running statistics were never updated.
std::vector<Tensor> batchnorm_infer_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                            std::span<const double> beta, const BatchNormState& state);

/// In train mode normalizes with batch statistics and folds them into the
/// running averages; in infer mode uses the running averages.
std::vector<Tensor> batchnorm_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                      std::span<const double> beta, BatchNormState& state, Mode mode,
                                      BatchNormCache* cache);

/// Train-mode backward. Accumulates parameter gradients.
std::vector<Tensor> batchnorm_backward(std::span<const Tensor> grad_out, std::span<const double> gamma,
                                       const BatchNormCache& cache, std::span<double> grad_gamma,
                                       std::span<double> grad_beta);

// ---------------------------------------------------------------------------

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Inverted dropout. Returns the scaled keep-mask (empty when inactive).
std::vector<double> dropout_mask(std::size_t n, double rate, std::mt19937_64& rng);
Tensor apply_mask(const Tensor& input, std::span<const double> mask);

Tensor merge_multiply(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// GRU, one direction. Gates ordered (update z, reset r, candidate h):
//   input_weight:     in x 3U   (row-major)
//   recurrent_weight: U  x 3U
//   bias:             3U

struct GruShape {
  std::size_t input = 0;
  std::size_t units = 0;
};

struct GruCache {
  std::vector<std::vector<double>> h;      // h[0] = 0, h[t+1] after step t
  std::vector<std::vector<double>> z, r, candidate;
};

/// Input is time x input (feature axis flattened with channels).
Tensor gru_forward(const Tensor& input, GruShape shape, std::span<const double> input_weight,
                   std::span<const double> recurrent_weight, std::span<const double> bias, GruCache* cache);

Tensor gru_backward(const Tensor& input, GruShape shape, std::span<const double> input_weight,
                    std::span<const double> recurrent_weight, const GruCache& cache, const Tensor& grad_out,
                    std::span<double> grad_input_weight, std::span<double> grad_recurrent_weight,
                    std::span<double> grad_bias);

/// Reverses the time axis.
Tensor reverse_time(const Tensor& input);

struct GruWeights {
  std::span<const double> input;
  std::span<const double> recurrent;
  std::span<const double> bias;
};

struct GruGradients {
  std::span<double> input;
  std::span<double> recurrent;
  std::span<double> bias;
};

struct BiGruCache {
  GruCache forward;
  GruCache backward;
};

/// Forward pass and a time-reversed pass, concatenated along features (T x 2U).
Tensor bigru_forward(const Tensor& input, GruShape shape, GruWeights fwd, GruWeights bwd, BiGruCache* cache);
Tensor bigru_backward(const Tensor& input, GruShape shape, GruWeights fwd, GruWeights bwd, const BiGruCache& cache,
                      const Tensor& grad_out, GruGradients grad_fwd, GruGradients grad_bwd);

// ---------------------------------------------------------------------------

enum class Activation { kLinear, kRelu, kTanh };

/// Same affine map at each time step: y_t = act(x_t W + b), W is in x out.
Tensor dense_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                     std::size_t out, Activation act);
Tensor dense_backward(const Tensor& input, std::span<const double> weight, const Tensor& output,
                      const Tensor& grad_out, Activation act, std::span<double> grad_weight,
                      std::span<double> grad_bias);

// ---------------------------------------------------------------------------
// Output head: mean over time, maxout over pieces, sigmoid.
// weight is pieces x in, bias is pieces.

struct MaxoutResult {
  double probability = 0.5;
  std::size_t active_piece = 0;
  std::vector<double> pooled;
};

MaxoutResult maxout_sigmoid_forward(const Tensor& input, std::span<const double> weight,
                                    std::span<const double> bias, std::size_t pieces);
Tensor maxout_sigmoid_backward(const Tensor& input, std::span<const double> weight,
                               const MaxoutResult& fwd, double grad_probability,
                               std::span<double> grad_weight, std::span<double> grad_bias);

double sigmoid(double x);

}  // namespace cbrnn
