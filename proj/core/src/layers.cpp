#include "cbrnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbrnn/error.hpp"

namespace cbrnn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor conv2d_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                      std::size_t out_channels) {
  const std::size_t T = input.time(), F = input.feature(), cin = input.channel();
  if (T == 0 || F == 0) throw ShapeError("conv2d: empty input " + input.shape_string());
  if (weight.size() != kKernel * kKernel * cin * out_channels) {
    throw ShapeError("conv2d: kernel of " + std::to_string(weight.size()) + " weights does not match " +
                     std::to_string(cin) + " input channels x " + std::to_string(out_channels) + " filters");
  }
  if (bias.size() != out_channels) throw ShapeError("conv2d: bias size mismatch");

  Tensor out(T, F, out_channels);
  const double* x = input.data().data();
  double* y = out.data().data();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double* yo = y + (t * F + f) * out_channels;
      std::copy(bias.begin(), bias.end(), yo);
      for (std::size_t dt = 0; dt < kKernel; ++dt) {
        const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t + dt) - 1;
        if (tt < 0 || tt >= static_cast<std::ptrdiff_t>(T)) continue;
        for (std::size_t df = 0; df < kKernel; ++df) {
          const std::ptrdiff_t ff = static_cast<std::ptrdiff_t>(f + df) - 1;
          if (ff < 0 || ff >= static_cast<std::ptrdiff_t>(F)) continue;
          const double* xi = x + (static_cast<std::size_t>(tt) * F + static_cast<std::size_t>(ff)) * cin;
          const double* w = weight.data() + (dt * kKernel + df) * cin * out_channels;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double xv = xi[ci];
            const double* wc = w + ci * out_channels;
            for (std::size_t co = 0; co < out_channels; ++co) yo[co] += xv * wc[co];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, std::span<const double> weight, const Tensor& grad_out,
                       std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t T = input.time(), F = input.feature(), cin = input.channel();
  const std::size_t cout = grad_out.channel();
  Tensor grad_in(T, F, cin);
  const double* x = input.data().data();
  const double* g = grad_out.data().data();
  double* gx = grad_in.data().data();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const double* go = g + (t * F + f) * cout;
      for (std::size_t co = 0; co < cout; ++co) grad_bias[co] += go[co];
      for (std::size_t dt = 0; dt < kKernel; ++dt) {
        const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t + dt) - 1;
        if (tt < 0 || tt >= static_cast<std::ptrdiff_t>(T)) continue;
        for (std::size_t df = 0; df < kKernel; ++df) {
          const std::ptrdiff_t ff = static_cast<std::ptrdiff_t>(f + df) - 1;
          if (ff < 0 || ff >= static_cast<std::ptrdiff_t>(F)) continue;
          const std::size_t in_off = (static_cast<std::size_t>(tt) * F + static_cast<std::size_t>(ff)) * cin;
          const std::size_t w_off = (dt * kKernel + df) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double xv = x[in_off + ci];
            const double* wc = weight.data() + w_off + ci * cout;
            double* gw = grad_weight.data() + w_off + ci * cout;
            double acc = 0.0;
            for (std::size_t co = 0; co < cout; ++co) {
              gw[co] += xv * go[co];
              acc += wc[co] * go[co];
            }
            gx[in_off + ci] += acc;
          }
        }
      }
    }
  }
  return grad_in;
}

PoolResult maxpool2d_forward(const Tensor& input, std::size_t pool_t, std::size_t pool_f) {
  const std::size_t T = input.time(), F = input.feature(), C = input.channel();
  if (pool_t == 0 || T % pool_t != 0) {
    throw ShapeError("maxpool2d: time axis " + std::to_string(T) + " not divisible by " + std::to_string(pool_t));
  }
  if (pool_f == 0 || F % pool_f != 0) {
    throw ShapeError("maxpool2d: feature axis " + std::to_string(F) + " not divisible by " +
                     std::to_string(pool_f));
  }
  PoolResult r{Tensor(T / pool_t, F / pool_f, C), std::vector<std::size_t>(T / pool_t * (F / pool_f) * C)};
  const double* x = input.data().data();
  for (std::size_t ot = 0; ot < T / pool_t; ++ot) {
    for (std::size_t of = 0; of < F / pool_f; ++of) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = ((ot * pool_t) * F + of * pool_f) * C + c;
        for (std::size_t dt = 0; dt < pool_t; ++dt) {
          for (std::size_t df = 0; df < pool_f; ++df) {
            std::size_t idx = ((ot * pool_t + dt) * F + of * pool_f + df) * C + c;
            if (x[idx] > x[best]) best = idx;
          }
        }
        std::size_t o = (ot * (F / pool_f) + of) * C + c;
        r.output.storage()[o] = x[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const std::array<std::size_t, 3>& input_dims) {
  Tensor grad_in(input_dims[0], input_dims[1], input_dims[2]);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in.storage()[argmax[o]] += grad_out.storage()[o];
  return grad_in;
}

namespace {

void check_batch(std::span<const Tensor> batch, std::span<const double> gamma, std::span<const double> beta,
                 const BatchNormState& state) {
  if (batch.empty()) throw ShapeError("batchnorm: empty batch");
  const std::size_t C = batch.front().channel();
  if (gamma.size() != C || beta.size() != C || state.running_mean.size() != C) {
    throw ShapeError("batchnorm: parameter size does not match " + std::to_string(C) + " channels");
  }
  for (const auto& x : batch) {
    if (!x.same_shape(batch.front())) throw ShapeError("batchnorm: ragged batch");
  }
}

std::vector<Tensor> normalize(std::span<const Tensor> batch, std::span<const double> gamma,
                              std::span<const double> beta, std::span<const double> mean,
                              std::span<const double> var, double epsilon, BatchNormCache* cache) {
  const std::size_t C = gamma.size();
  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + epsilon);
  std::vector<Tensor> out;
  out.reserve(batch.size());
  if (cache) {
    cache->normalized.clear();
    cache->inv_std = inv_std;
  }
  for (const auto& x : batch) {
    Tensor y(x.time(), x.feature(), C);
    Tensor xhat;
    if (cache) xhat = Tensor(x.time(), x.feature(), C);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t c = i % C;
      const double n = (x.storage()[i] - mean[c]) * inv_std[c];
      if (cache) xhat.storage()[i] = n;
      y.storage()[i] = gamma[c] * n + beta[c];
    }
    if (cache) cache->normalized.push_back(std::move(xhat));
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace

std::vector<Tensor> batchnorm_train_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                            std::span<const double> beta, BatchNormState& state,
                                            BatchNormCache* cache) {
  check_batch(batch, gamma, beta, state);
  if (batch.size() < 2) throw ShapeError("batchnorm: train mode needs a batch of at least 2 samples");
  const std::size_t C = gamma.size();
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  const double count = static_cast<double>(batch.size() * batch.front().time() * batch.front().feature());
  for (const auto& x : batch) {
    for (std::size_t i = 0; i < x.size(); ++i) mean[i % C] += x.storage()[i];
  }
  for (auto& m : mean) m /= count;
  for (const auto& x : batch) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x.storage()[i] - mean[i % C];
      var[i % C] += d * d;
    }
  }
  for (auto& v : var) v /= count;

  // Running variance tracks the unbiased estimate. The first update seeds
  // the averages directly from the batch.
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  for (std::size_t c = 0; c < C; ++c) {
    if (state.updates == 0) {
      state.running_mean[c] = mean[c];
      state.running_var[c] = var[c] * unbias;
    } else {
      state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
      state.running_var[c] = state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c] * unbias;
    }
  }
  ++state.updates;
  return normalize(batch, gamma, beta, mean, var, state.epsilon, cache);
}

std::vector<Tensor> batchnorm_infer_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                            std::span<const double> beta, const BatchNormState& state) {
  check_batch(batch, gamma, beta, state);
  if (state.updates == 0) throw Error("batchnorm: inference requested before any training update");
  return normalize(batch, gamma, beta, state.running_mean, state.running_var, state.epsilon, nullptr);
}

std::vector<Tensor> batchnorm_forward(std::span<const Tensor> batch, std::span<const double> gamma,
                                      std::span<const double> beta, BatchNormState& state, Mode mode,
                                      BatchNormCache* cache) {
  if (mode == Mode::kTrain) return batchnorm_train_forward(batch, gamma, beta, state, cache);
  return batchnorm_infer_forward(batch, gamma, beta, state);
}

std::vector<Tensor> batchnorm_backward(std::span<const Tensor> grad_out, std::span<const double> gamma,
                                       const BatchNormCache& cache, std::span<double> grad_gamma,
                                       std::span<double> grad_beta) {
  const std::size_t C = gamma.size();
  const double count =
      static_cast<double>(grad_out.size() * grad_out.front().time() * grad_out.front().feature());
  std::vector<double> dgamma(C, 0.0), dbeta(C, 0.0);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const auto& g = grad_out[b].storage();
    const auto& xhat = cache.normalized[b].storage();
    for (std::size_t i = 0; i < g.size(); ++i) {
      dgamma[i % C] += g[i] * xhat[i];
      dbeta[i % C] += g[i];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    grad_gamma[c] += dgamma[c];
    grad_beta[c] += dbeta[c];
  }
  std::vector<Tensor> grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const auto& g = grad_out[b];
    const auto& xhat = cache.normalized[b].storage();
    Tensor dx(g.time(), g.feature(), C);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t c = i % C;
      dx.storage()[i] = gamma[c] * cache.inv_std[c] / count *
                        (count * g.storage()[i] - dbeta[c] - xhat[i] * dgamma[c]);
    }
    grad_in.push_back(std::move(dx));
  }
  return grad_in;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.storage()) v = std::max(v, 0.0);
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input.storage()[i] > 0.0)) g.storage()[i] = 0.0;
  }
  return g;
}

std::vector<double> dropout_mask(std::size_t n, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(n);
  for (auto& m : mask) m = keep(rng) ? scale : 0.0;
  return mask;
}

Tensor apply_mask(const Tensor& input, std::span<const double> mask) {
  if (mask.empty()) return input;
  Tensor out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] *= mask[i];
  return out;
}

Tensor merge_multiply(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("merge: shapes " + a.shape_string() + " and " + b.shape_string() + " differ");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] *= b.storage()[i];
  return out;
}

Tensor gru_forward(const Tensor& input, GruShape shape, std::span<const double> input_weight,
                   std::span<const double> recurrent_weight, std::span<const double> bias, GruCache* cache) {
  const std::size_t T = input.time();
  const std::size_t in = input.feature() * input.channel();
  const std::size_t U = shape.units;
  if (in != shape.input) {
    throw ShapeError("gru: expects " + std::to_string(shape.input) + " input features, got " + std::to_string(in));
  }
  if (T == 0) throw ShapeError("gru: empty sequence");
  const std::size_t G = 3 * U;
  Tensor out(T, U);
  std::vector<double> h(U, 0.0), pre(G), rec(G), rh(U);
  if (cache) {
    cache->h.assign(1, h);
    cache->z.clear();
    cache->r.clear();
    cache->candidate.clear();
  }
  const double* x = input.data().data();
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(bias.begin(), bias.end(), pre.begin());
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x[t * in + i];
      const double* w = input_weight.data() + i * G;
      for (std::size_t g = 0; g < G; ++g) pre[g] += xv * w[g];
    }
    std::fill(rec.begin(), rec.end(), 0.0);
    for (std::size_t j = 0; j < U; ++j) {
      const double hv = h[j];
      const double* w = recurrent_weight.data() + j * G;
      for (std::size_t g = 0; g < 2 * U; ++g) rec[g] += hv * w[g];
    }
    std::vector<double> z(U), r(U), cand(U), hn(U);
    for (std::size_t u = 0; u < U; ++u) {
      z[u] = sigmoid(pre[u] + rec[u]);
      r[u] = sigmoid(pre[U + u] + rec[U + u]);
      rh[u] = r[u] * h[u];
    }
    for (std::size_t u = 0; u < U; ++u) {
      double a = pre[2 * U + u];
      for (std::size_t j = 0; j < U; ++j) a += rh[j] * recurrent_weight[j * G + 2 * U + u];
      cand[u] = std::tanh(a);
      hn[u] = (1.0 - z[u]) * h[u] + z[u] * cand[u];
      out(t, u) = hn[u];
    }
    h = hn;
    if (cache) {
      cache->h.push_back(hn);
      cache->z.push_back(std::move(z));
      cache->r.push_back(std::move(r));
      cache->candidate.push_back(std::move(cand));
    }
  }
  return out;
}

Tensor gru_backward(const Tensor& input, GruShape shape, std::span<const double> input_weight,
                    std::span<const double> recurrent_weight, const GruCache& cache, const Tensor& grad_out,
                    std::span<double> grad_input_weight, std::span<double> grad_recurrent_weight,
                    std::span<double> grad_bias) {
  const std::size_t T = input.time();
  const std::size_t in = shape.input;
  const std::size_t U = shape.units;
  const std::size_t G = 3 * U;
  Tensor grad_in(T, input.feature(), input.channel());
  std::vector<double> dh_next(U, 0.0), da(G), drh(U);
  const double* x = input.data().data();
  for (std::size_t step = T; step-- > 0;) {
    const auto& hp = cache.h[step];
    const auto& z = cache.z[step];
    const auto& r = cache.r[step];
    const auto& c = cache.candidate[step];
    std::vector<double> dh(U), dh_prev(U);
    for (std::size_t u = 0; u < U; ++u) dh[u] = grad_out(step, u) + dh_next[u];

    for (std::size_t u = 0; u < U; ++u) {
      const double dz = dh[u] * (c[u] - hp[u]);
      const double dc = dh[u] * z[u];
      dh_prev[u] = dh[u] * (1.0 - z[u]);
      da[u] = dz * z[u] * (1.0 - z[u]);
      da[2 * U + u] = dc * (1.0 - c[u] * c[u]);
    }
    // Candidate path through r * h_prev.
    for (std::size_t j = 0; j < U; ++j) {
      double acc = 0.0;
      const double rhj = r[j] * hp[j];
      for (std::size_t u = 0; u < U; ++u) {
        acc += recurrent_weight[j * G + 2 * U + u] * da[2 * U + u];
        grad_recurrent_weight[j * G + 2 * U + u] += rhj * da[2 * U + u];
      }
      drh[j] = acc;
    }
    for (std::size_t u = 0; u < U; ++u) {
      da[U + u] = drh[u] * hp[u] * r[u] * (1.0 - r[u]);
      dh_prev[u] += drh[u] * r[u];
    }
    // Update/reset recurrent path.
    for (std::size_t j = 0; j < U; ++j) {
      double acc = 0.0;
      for (std::size_t g = 0; g < 2 * U; ++g) {
        acc += recurrent_weight[j * G + g] * da[g];
        grad_recurrent_weight[j * G + g] += hp[j] * da[g];
      }
      dh_prev[j] += acc;
    }
    for (std::size_t g = 0; g < G; ++g) grad_bias[g] += da[g];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x[step * in + i];
      const double* w = input_weight.data() + i * G;
      double* gw = grad_input_weight.data() + i * G;
      double acc = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        gw[g] += xv * da[g];
        acc += w[g] * da[g];
      }
      grad_in.storage()[step * in + i] = acc;
    }
    dh_next = dh_prev;
  }
  return grad_in;
}

Tensor reverse_time(const Tensor& input) {
  Tensor out(input.time(), input.feature(), input.channel());
  const std::size_t row = input.feature() * input.channel();
  for (std::size_t t = 0; t < input.time(); ++t) {
    std::copy_n(input.storage().begin() + static_cast<std::ptrdiff_t>(t * row), row,
                out.storage().begin() + static_cast<std::ptrdiff_t>((input.time() - 1 - t) * row));
  }
  return out;
}

namespace {

Tensor concat_features(const Tensor& a, const Tensor& b) {
  Tensor out(a.time(), a.feature() + b.feature());
  for (std::size_t t = 0; t < a.time(); ++t) {
    for (std::size_t i = 0; i < a.feature(); ++i) out(t, i) = a(t, i);
    for (std::size_t i = 0; i < b.feature(); ++i) out(t, a.feature() + i) = b(t, i);
  }
  return out;
}

Tensor slice_features(const Tensor& x, std::size_t begin, std::size_t count) {
  Tensor out(x.time(), count);
  for (std::size_t t = 0; t < x.time(); ++t) {
    for (std::size_t i = 0; i < count; ++i) out(t, i) = x(t, begin + i);
  }
  return out;
}

}  // namespace

Tensor bigru_forward(const Tensor& input, GruShape shape, GruWeights fwd, GruWeights bwd, BiGruCache* cache) {
  Tensor f = gru_forward(input, shape, fwd.input, fwd.recurrent, fwd.bias, cache ? &cache->forward : nullptr);
  Tensor b = reverse_time(gru_forward(reverse_time(input), shape, bwd.input, bwd.recurrent, bwd.bias,
                                      cache ? &cache->backward : nullptr));
  return concat_features(f, b);
}

Tensor bigru_backward(const Tensor& input, GruShape shape, GruWeights fwd, GruWeights bwd, const BiGruCache& cache,
                      const Tensor& grad_out, GruGradients grad_fwd, GruGradients grad_bwd) {
  const std::size_t U = shape.units;
  Tensor dx = gru_backward(input, shape, fwd.input, fwd.recurrent, cache.forward, slice_features(grad_out, 0, U),
                           grad_fwd.input, grad_fwd.recurrent, grad_fwd.bias);
  Tensor dx_rev = gru_backward(reverse_time(input), shape, bwd.input, bwd.recurrent, cache.backward,
                               reverse_time(slice_features(grad_out, U, U)), grad_bwd.input, grad_bwd.recurrent,
                               grad_bwd.bias);
  Tensor back = reverse_time(dx_rev);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.storage()[i] += back.storage()[i];
  return dx;
}

Tensor dense_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                     std::size_t out, Activation act) {
  const std::size_t T = input.time();
  const std::size_t in = input.feature() * input.channel();
  if (weight.size() != in * out || bias.size() != out) {
    throw ShapeError("dense: weight shape does not match input width " + std::to_string(in));
  }
  Tensor y(T, out);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t o = 0; o < out; ++o) y(t, o) = bias[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = input.storage()[t * in + i];
      for (std::size_t o = 0; o < out; ++o) y(t, o) += xv * weight[i * out + o];
    }
    for (std::size_t o = 0; o < out; ++o) {
      double& v = y(t, o);
      if (act == Activation::kRelu) v = std::max(v, 0.0);
      if (act == Activation::kTanh) v = std::tanh(v);
    }
  }
  return y;
}

Tensor dense_backward(const Tensor& input, std::span<const double> weight, const Tensor& output,
                      const Tensor& grad_out, Activation act, std::span<double> grad_weight,
                      std::span<double> grad_bias) {
  const std::size_t T = input.time();
  const std::size_t in = input.feature() * input.channel();
  const std::size_t out = output.feature();
  Tensor grad_in(T, input.feature(), input.channel());
  std::vector<double> da(out);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t o = 0; o < out; ++o) {
      double g = grad_out(t, o);
      const double y = output(t, o);
      if (act == Activation::kRelu && !(y > 0.0)) g = 0.0;
      if (act == Activation::kTanh) g *= 1.0 - y * y;
      da[o] = g;
      grad_bias[o] += g;
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = input.storage()[t * in + i];
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        grad_weight[i * out + o] += xv * da[o];
        acc += weight[i * out + o] * da[o];
      }
      grad_in.storage()[t * in + i] = acc;
    }
  }
  return grad_in;
}

MaxoutResult maxout_sigmoid_forward(const Tensor& input, std::span<const double> weight,
                                    std::span<const double> bias, std::size_t pieces) {
  const std::size_t T = input.time();
  const std::size_t in = input.feature() * input.channel();
  if (pieces < 2) throw ConfigError("maxout needs at least 2 pieces");
  if (weight.size() != pieces * in || bias.size() != pieces) throw ShapeError("maxout: weight shape mismatch");
  MaxoutResult r;
  r.pooled.assign(in, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < in; ++i) r.pooled[i] += input.storage()[t * in + i];
  }
  for (auto& v : r.pooled) v /= static_cast<double>(T);
  double best = 0.0;
  for (std::size_t p = 0; p < pieces; ++p) {
    double s = bias[p];
    for (std::size_t i = 0; i < in; ++i) s += weight[p * in + i] * r.pooled[i];
    if (p == 0 || s > best) {
      best = s;
      r.active_piece = p;
    }
  }
  // Keep the output strictly inside (0, 1) even when the sigmoid saturates.
  r.probability = std::clamp(sigmoid(best), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  return r;
}

Tensor maxout_sigmoid_backward(const Tensor& input, std::span<const double> weight, const MaxoutResult& fwd,
                               double grad_probability, std::span<double> grad_weight,
                               std::span<double> grad_bias) {
  const std::size_t T = input.time();
  const std::size_t in = input.feature() * input.channel();
  const std::size_t p = fwd.active_piece;
  const double ds = grad_probability * fwd.probability * (1.0 - fwd.probability);
  grad_bias[p] += ds;
  for (std::size_t i = 0; i < in; ++i) grad_weight[p * in + i] += ds * fwd.pooled[i];
  Tensor grad_in(T, input.feature(), input.channel());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < in; ++i) {
      grad_in.storage()[t * in + i] = ds * weight[p * in + i] / static_cast<double>(T);
    }
  }
  return grad_in;
}

}  // namespace cbrnn
