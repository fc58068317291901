#include "cbrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbrnn/error.hpp"

namespace cbrnn {
namespace {

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

void check_pooling(const char* branch, std::size_t width, const std::vector<std::size_t>& pools) {
  std::size_t w = width;
  for (std::size_t l = 0; l < pools.size(); ++l) {
    if (pools[l] == 0 || w % pools[l] != 0) {
      throw ConfigError(std::string(branch) + " frequency axis: width " + std::to_string(w) +
                        " at layer " + std::to_string(l) + " not divisible by pool " + std::to_string(pools[l]));
    }
    w /= pools[l];
  }
  if (w != 1) {
    throw ConfigError(std::string(branch) + " frequency axis: pooling leaves width " + std::to_string(w) +
                      ", expected 1");
  }
}

void glorot_fill(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w) v = dist(rng);
}

}  // namespace

std::string to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::kMbe: return "mbe";
    case FeatureSet::kDomFreq: return "domfreq";
    case FeatureSet::kBoth: return "both";
  }
  return "both";
}

FeatureSet parse_feature_set(const std::string& s) {
  if (s == "mbe") return FeatureSet::kMbe;
  if (s == "domfreq") return FeatureSet::kDomFreq;
  if (s == "both") return FeatureSet::kBoth;
  throw ConfigError("unknown feature set '" + s + "' (expected mbe, domfreq or both)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "linear";
}

Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}

void CbrnnConfig::validate() const {
  if (n_cnn_layers == 0) throw ConfigError("n_cnn_layers must be >= 1");
  if (n_filters == 0) throw ConfigError("n_filters must be >= 1");
  if (pool_time.size() != n_cnn_layers) throw ConfigError("pool_time needs one factor per CNN layer");
  if (pool_freq_mbe.size() != n_cnn_layers) throw ConfigError("pool_freq_mbe needs one factor per CNN layer");
  if (pool_freq_domfreq.size() != n_cnn_layers) {
    throw ConfigError("pool_freq_domfreq needs one factor per CNN layer");
  }
  if (std::find(pool_time.begin(), pool_time.end(), 0u) != pool_time.end() ||
      product(pool_time) * kSequenceSteps != frames) {
    throw ConfigError("time axis: product of pool_time x " + std::to_string(kSequenceSteps) +
                      " must equal frames (" + std::to_string(frames) + ")");
  }
  if (uses_mbe()) check_pooling("mbe", mbe_bands, pool_freq_mbe);
  if (uses_domfreq()) check_pooling("domfreq", domfreq_width, pool_freq_domfreq);
  if (rnn_layers == 0 || rnn_units == 0) throw ConfigError("rnn_layers and rnn_units must be >= 1");
  if (fc_layers == 0 || fc_units == 0) throw ConfigError("fc_layers and fc_units must be >= 1");
  if (maxout_pieces < 2) throw ConfigError("maxout_pieces must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

std::vector<std::size_t> split_pool_factors(std::size_t total, std::size_t layers) {
  if (layers == 0 || total == 0) throw ConfigError("pooling split needs a positive total and layer count");
  std::vector<std::size_t> primes;
  for (std::size_t n = total, p = 2; n > 1;) {
    if (p * p > n) {
      primes.push_back(n);
      break;
    }
    if (n % p == 0) {
      primes.push_back(p);
      n /= p;
    } else {
      ++p;
    }
  }
  std::sort(primes.rbegin(), primes.rend());
  std::vector<std::size_t> out(layers, 1);
  for (std::size_t p : primes) {
    auto it = std::min_element(out.begin(), out.end());
    *it *= p;
  }
  return out;
}

CbrnnConfig CbrnnConfig::with_domfreq_width(std::size_t width) const {
  CbrnnConfig c = *this;
  c.domfreq_width = width;
  c.pool_freq_domfreq = split_pool_factors(width, c.n_cnn_layers);
  return c;
}

CbrnnConfig CbrnnConfig::with_cnn_layers(std::size_t layers) const {
  CbrnnConfig c = *this;
  c.n_cnn_layers = layers;
  if (frames % kSequenceSteps != 0) {
    throw ConfigError("time axis: frames (" + std::to_string(frames) + ") not divisible by " +
                      std::to_string(kSequenceSteps));
  }
  c.pool_time = split_pool_factors(frames / kSequenceSteps, layers);
  c.pool_freq_mbe = split_pool_factors(mbe_bands, layers);
  c.pool_freq_domfreq = split_pool_factors(domfreq_width, layers);
  return c;
}

std::size_t CbrnnModel::add_group(std::string name, std::size_t size) {
  params_.push_back({std::move(name), std::vector<double>(size, 0.0)});
  return params_.size() - 1;
}

CbrnnModel::Branch CbrnnModel::build_branch(const std::string& prefix, std::size_t in_channels,
                                            const std::vector<std::size_t>& pool_f, std::mt19937_64& rng) {
  Branch br;
  std::size_t cin = in_channels;
  const std::size_t nf = cfg_.n_filters;
  for (std::size_t l = 0; l < cfg_.n_cnn_layers; ++l) {
    const std::string tag = prefix + ".conv" + std::to_string(l);
    ConvLayer layer{};
    layer.kernel = add_group(tag + ".kernel", kKernel * kKernel * cin * nf);
    glorot_fill(params_[layer.kernel].value, kKernel * kKernel * cin, kKernel * kKernel * nf, rng);
    layer.bias = add_group(tag + ".bias", nf);
    const std::string bn = prefix + ".bn" + std::to_string(l);
    layer.gamma = add_group(bn + ".gamma", nf);
    std::fill(params_[layer.gamma].value.begin(), params_[layer.gamma].value.end(), 1.0);
    layer.beta = add_group(bn + ".beta", nf);
    bn_.emplace_back(nf);
    layer.bn_state = bn_.size() - 1;
    layer.pool_t = cfg_.pool_time[l];
    layer.pool_f = pool_f[l];
    br.layers.push_back(layer);
    cin = nf;
  }
  return br;
}

CbrnnModel::CbrnnModel(const CbrnnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  if (cfg_.uses_mbe()) mbe_ = build_branch("mbe", 1, cfg_.pool_freq_mbe, rng);
  if (cfg_.uses_domfreq()) domfreq_ = build_branch("domfreq", 2, cfg_.pool_freq_domfreq, rng);

  std::size_t width = cfg_.n_filters;
  for (std::size_t l = 0; l < cfg_.rnn_layers; ++l) {
    GruLayer g{};
    g.shape = {width, cfg_.rnn_units};
    const std::size_t G = 3 * cfg_.rnn_units;
    const std::string tag = "gru" + std::to_string(l);
    for (const char* dir : {"fwd", "bwd"}) {
      std::size_t w = add_group(tag + "." + dir + ".input_weight", width * G);
      glorot_fill(params_[w].value, width, G, rng);
      std::size_t u = add_group(tag + "." + dir + ".recurrent_weight", cfg_.rnn_units * G);
      glorot_fill(params_[u].value, cfg_.rnn_units, G, rng);
      std::size_t b = add_group(tag + "." + dir + ".bias", G);
      if (std::string(dir) == "fwd") {
        g.fwd_w = w, g.fwd_u = u, g.fwd_b = b;
      } else {
        g.bwd_w = w, g.bwd_u = u, g.bwd_b = b;
      }
    }
    gru_.push_back(g);
    width = 2 * cfg_.rnn_units;
  }
  for (std::size_t l = 0; l < cfg_.fc_layers; ++l) {
    DenseLayer d{};
    d.in = width;
    d.out = cfg_.fc_units;
    const std::string tag = "dense" + std::to_string(l);
    d.weight = add_group(tag + ".weight", d.in * d.out);
    glorot_fill(params_[d.weight].value, d.in, d.out, rng);
    d.bias = add_group(tag + ".bias", d.out);
    dense_.push_back(d);
    width = cfg_.fc_units;
  }
  head_w_ = add_group("head.weight", cfg_.maxout_pieces * width);
  glorot_fill(params_[head_w_].value, width, cfg_.maxout_pieces, rng);
  head_b_ = add_group("head.bias", cfg_.maxout_pieces);
}

CbrnnModel build_model(const CbrnnConfig& cfg, std::uint64_t seed) { return CbrnnModel(cfg, seed); }

std::size_t CbrnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : params_) n += g.value.size();
  return n;
}

const ParameterGroup* CbrnnModel::find(const std::string& name) const {
  for (const auto& g : params_) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

Gradients CbrnnModel::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.size(), 0.0);
  return g;
}

void CbrnnModel::check_input(const FeaturePair& pair) const {
  if (cfg_.uses_mbe()) {
    const auto& d = pair.mbe.dims();
    if (d[0] != cfg_.frames || d[1] != cfg_.mbe_bands || d[2] != 1) {
      throw ShapeError("mbe branch: expected " + std::to_string(cfg_.frames) + "x" +
                       std::to_string(cfg_.mbe_bands) + "x1 input, got " + pair.mbe.shape_string());
    }
  }
  if (cfg_.uses_domfreq()) {
    const auto& d = pair.domfreq.dims();
    if (d[0] != cfg_.frames || d[1] != cfg_.domfreq_width || d[2] != 2) {
      throw ShapeError("domfreq branch: expected " + std::to_string(cfg_.frames) + "x" +
                       std::to_string(cfg_.domfreq_width) + "x2 input, got " + pair.domfreq.shape_string());
    }
  }
}

std::vector<double> CbrnnModel::run(std::span<const FeaturePair* const> batch, Mode mode, std::mt19937_64* rng,
                                    Trace* trace, std::vector<BatchNormState>* bn_update) const {
  const std::size_t B = batch.size();
  if (B == 0) throw ShapeError("empty batch");
  for (const auto* p : batch) check_input(*p);
  const bool dropping = mode == Mode::kTrain && cfg_.dropout > 0.0;
  auto mask_for = [&](std::size_t n) { return dropping ? dropout_mask(n, cfg_.dropout, *rng) : std::vector<double>{}; };

  auto run_branch = [&](const Branch& br, bool use_mbe, Trace::BranchTrace* bt) {
    std::vector<Tensor> xs;
    xs.reserve(B);
    for (const auto* p : batch) xs.push_back(use_mbe ? p->mbe : p->domfreq);
    if (bt) {
      const std::size_t L = br.layers.size();
      bt->conv_in.assign(L, {});
      bt->bn_out.assign(L, {});
      bt->bn.assign(L, {});
      bt->argmax.assign(L, {});
      bt->mask.assign(L, {});
    }
    for (std::size_t l = 0; l < br.layers.size(); ++l) {
      const auto& layer = br.layers[l];
      std::vector<Tensor> conv(B);
      for (std::size_t b = 0; b < B; ++b) {
        conv[b] = conv2d_forward(xs[b], params_[layer.kernel].value, params_[layer.bias].value, cfg_.n_filters);
      }
      std::vector<Tensor> normed =
          mode == Mode::kTrain
              ? batchnorm_train_forward(conv, params_[layer.gamma].value, params_[layer.beta].value,
                                        (*bn_update)[layer.bn_state], bt ? &bt->bn[l] : nullptr)
              : batchnorm_infer_forward(conv, params_[layer.gamma].value, params_[layer.beta].value,
                                        bn_[layer.bn_state]);
      std::vector<Tensor> next(B);
      for (std::size_t b = 0; b < B; ++b) {
        PoolResult pooled = maxpool2d_forward(relu_forward(normed[b]), layer.pool_t, layer.pool_f);
        auto mask = mask_for(pooled.output.size());
        next[b] = apply_mask(pooled.output, mask);
        if (bt) {
          bt->argmax[l].push_back(std::move(pooled.argmax));
          bt->mask[l].push_back(std::move(mask));
        }
      }
      if (bt) {
        bt->conv_in[l] = std::move(xs);
        bt->bn_out[l] = std::move(normed);
      }
      xs = std::move(next);
    }
    if (bt) bt->output = xs;
    return xs;
  };

  std::vector<Tensor> merged;
  if (cfg_.features == FeatureSet::kBoth) {
    auto a = run_branch(mbe_, true, trace ? &trace->mbe : nullptr);
    auto b = run_branch(domfreq_, false, trace ? &trace->domfreq : nullptr);
    merged.resize(B);
    for (std::size_t i = 0; i < B; ++i) merged[i] = merge_multiply(a[i], b[i]);
  } else if (cfg_.features == FeatureSet::kMbe) {
    merged = run_branch(mbe_, true, trace ? &trace->mbe : nullptr);
  } else {
    merged = run_branch(domfreq_, false, trace ? &trace->domfreq : nullptr);
  }

  if (trace) trace->samples.assign(B, {});
  std::vector<double> probs(B);
  for (std::size_t b = 0; b < B; ++b) {
    Trace::SampleTrace* st = trace ? &trace->samples[b] : nullptr;
    Tensor seq = std::move(merged[b]);
    for (const auto& g : gru_) {
      BiGruCache cache;
      Tensor out = bigru_forward(seq, g.shape, {params_[g.fwd_w].value, params_[g.fwd_u].value, params_[g.fwd_b].value},
                                 {params_[g.bwd_w].value, params_[g.bwd_u].value, params_[g.bwd_b].value},
                                 st ? &cache : nullptr);
      auto mask = mask_for(out.size());
      Tensor dropped = apply_mask(out, mask);
      if (st) {
        st->gru_in.push_back(std::move(seq));
        st->gru_cache.push_back(std::move(cache));
        st->gru_mask.push_back(std::move(mask));
      }
      seq = std::move(dropped);
    }
    for (const auto& d : dense_) {
      Tensor out = dense_forward(seq, params_[d.weight].value, params_[d.bias].value, d.out, cfg_.fc_activation);
      auto mask = mask_for(out.size());
      Tensor dropped = apply_mask(out, mask);
      if (st) {
        st->dense_in.push_back(std::move(seq));
        st->dense_out.push_back(std::move(out));
        st->dense_mask.push_back(std::move(mask));
      }
      seq = std::move(dropped);
    }
    MaxoutResult head = maxout_sigmoid_forward(seq, params_[head_w_].value, params_[head_b_].value,
                                               cfg_.maxout_pieces);
    probs[b] = head.probability;
    if (st) {
      st->head_in = std::move(seq);
      st->head = std::move(head);
    }
  }
  return probs;
}

std::vector<double> CbrnnModel::forward_train(std::span<const FeaturePair* const> batch, std::mt19937_64& rng,
                                              Trace& trace) {
  return run(batch, Mode::kTrain, &rng, &trace, &bn_);
}

double CbrnnModel::predict(const FeaturePair& pair) const {
  const FeaturePair* p = &pair;
  return run(std::span<const FeaturePair* const>(&p, 1), Mode::kInfer, nullptr, nullptr, nullptr).front();
}

std::vector<double> CbrnnModel::predict(std::span<const FeaturePair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(predict(p));
  return out;
}

Gradients CbrnnModel::backward(const Trace& trace, std::span<const double> grad_probability) const {
  const std::size_t B = trace.samples.size();
  if (grad_probability.size() != B) throw ShapeError("backward: gradient count does not match batch");
  Gradients grads = zero_gradients();
  std::vector<Tensor> d_merged(B);

  for (std::size_t b = 0; b < B; ++b) {
    const auto& st = trace.samples[b];
    Tensor g = maxout_sigmoid_backward(st.head_in, params_[head_w_].value, st.head, grad_probability[b],
                                       grads[head_w_], grads[head_b_]);
    for (std::size_t l = dense_.size(); l-- > 0;) {
      const auto& d = dense_[l];
      g = apply_mask(g, st.dense_mask[l]);
      g = dense_backward(st.dense_in[l], params_[d.weight].value, st.dense_out[l], g, cfg_.fc_activation,
                         grads[d.weight], grads[d.bias]);
    }
    for (std::size_t l = gru_.size(); l-- > 0;) {
      const auto& gl = gru_[l];
      g = apply_mask(g, st.gru_mask[l]);
      g = bigru_backward(st.gru_in[l], gl.shape,
                         {params_[gl.fwd_w].value, params_[gl.fwd_u].value, params_[gl.fwd_b].value},
                         {params_[gl.bwd_w].value, params_[gl.bwd_u].value, params_[gl.bwd_b].value},
                         st.gru_cache[l], g, {grads[gl.fwd_w], grads[gl.fwd_u], grads[gl.fwd_b]},
                         {grads[gl.bwd_w], grads[gl.bwd_u], grads[gl.bwd_b]});
    }
    d_merged[b] = std::move(g);
  }

  auto branch_backward = [&](const Branch& br, const Trace::BranchTrace& bt, std::vector<Tensor> g) {
    for (std::size_t l = br.layers.size(); l-- > 0;) {
      const auto& layer = br.layers[l];
      for (std::size_t b = 0; b < B; ++b) {
        g[b] = apply_mask(g[b], bt.mask[l][b]);
        g[b] = maxpool2d_backward(g[b], bt.argmax[l][b], bt.bn_out[l][b].dims());
        g[b] = relu_backward(bt.bn_out[l][b], g[b]);
      }
      g = batchnorm_backward(g, params_[layer.gamma].value, bt.bn[l], grads[layer.gamma], grads[layer.beta]);
      for (std::size_t b = 0; b < B; ++b) {
        g[b] = conv2d_backward(bt.conv_in[l][b], params_[layer.kernel].value, g[b], grads[layer.kernel],
                               grads[layer.bias]);
      }
    }
  };

  if (cfg_.features == FeatureSet::kBoth) {
    std::vector<Tensor> ga(B), gb(B);
    for (std::size_t b = 0; b < B; ++b) {
      ga[b] = merge_multiply(d_merged[b], trace.domfreq.output[b]);
      gb[b] = merge_multiply(d_merged[b], trace.mbe.output[b]);
    }
    branch_backward(mbe_, trace.mbe, std::move(ga));
    branch_backward(domfreq_, trace.domfreq, std::move(gb));
  } else if (cfg_.features == FeatureSet::kMbe) {
    branch_backward(mbe_, trace.mbe, std::move(d_merged));
  } else {
    branch_backward(domfreq_, trace.domfreq, std::move(d_merged));
  }
  return grads;
}

}  // namespace cbrnn
