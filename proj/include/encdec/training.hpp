// Copyright 2026 The encdec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Teacher-forced training of the toy model in either data layout:
//   PiE  one example per (X, Z_u, Y_u): U encoder passes per input
//   PiD  one example per X with all U prompts sharing one encoding
// The loss is cross-entropy over output tokens only; prompt positions in the
// PiD decoder carry no loss. Updates are plain SGD with a fixed rate.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "encdec/attention.hpp"
#include "encdec/autograd.hpp"
#include "encdec/engines.hpp"
#include "encdec/model.hpp"
#include "encdec/synthetic.hpp"

namespace encdec {

template <typename T>
struct GraphAttention {
  std::size_t wq, wk, wv, wo;
};

template <typename T>
struct GraphParams {
  struct Enc {
    std::size_t ln_attn, ln_ffn, w1, w2;
    GraphAttention<T> self;
  };
  struct Dec {
    std::size_t ln_self, ln_cross, ln_ffn, w1, w2;
    GraphAttention<T> self, cross;
  };
  std::size_t embedding, enc_final_ln, dec_final_ln, lm_head;
  std::vector<Enc> enc;
  std::vector<Dec> dec;
};

// Registers every weight as a graph parameter whose gradient lands in the
// matching buffer of `grads`.
template <typename T>
GraphParams<T> bind_parameters(Graph<T>& g, const BasicWeightSet<T>& w, BasicWeightSet<T>& grads) {
  auto mat = [&](const BasicMatrix<T>& m, BasicMatrix<T>& gm) { return g.parameter(m, gm.data()); };
  auto vec = [&](const std::vector<T>& v, std::vector<T>& gv) {
    return g.parameter(std::span<const T>(v), std::span<T>(gv));
  };
  auto attn = [&](const AttentionWeights<T>& a, AttentionWeights<T>& ga) {
    return GraphAttention<T>{mat(a.wq, ga.wq), mat(a.wk, ga.wk), mat(a.wv, ga.wv), mat(a.wo, ga.wo)};
  };
  GraphParams<T> p;
  p.embedding = mat(w.embedding, grads.embedding);
  for (std::size_t l = 0; l < w.encoder.size(); ++l) {
    const auto& e = w.encoder[l];
    auto& ge = grads.encoder[l];
    p.enc.push_back({vec(e.ln_attn, ge.ln_attn), vec(e.ln_ffn, ge.ln_ffn), mat(e.w1, ge.w1),
                     mat(e.w2, ge.w2), attn(e.self, ge.self)});
  }
  p.enc_final_ln = vec(w.enc_final_ln, grads.enc_final_ln);
  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    const auto& e = w.decoder[l];
    auto& ge = grads.decoder[l];
    p.dec.push_back({vec(e.ln_self, ge.ln_self), vec(e.ln_cross, ge.ln_cross), vec(e.ln_ffn, ge.ln_ffn),
                     mat(e.w1, ge.w1), mat(e.w2, ge.w2), attn(e.self, ge.self),
                     attn(e.cross, ge.cross)});
  }
  p.dec_final_ln = vec(w.dec_final_ln, grads.dec_final_ln);
  p.lm_head = mat(w.lm_head, grads.lm_head);
  return p;
}

namespace detail {

template <typename T>
std::size_t graph_embed(Graph<T>& g, const GraphParams<T>& p, const ModelConfig& config,
                        const TokenSeq& tokens, CounterSet& c) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
      throw UsageError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }
  CounterSink& s = c.at(Component::embedding);
  const std::size_t rows = g.gather(p.embedding, tokens, s);
  const std::size_t pe = g.constant(positional_encoding<T>(0, tokens.size(), config.d_model));
  return g.add(rows, pe, s);
}

template <typename T>
std::size_t graph_attention(Graph<T>& g, std::size_t q, std::size_t k, std::size_t v,
                            const AttentionMask& mask, std::size_t heads, CounterSink& s) {
  const std::size_t d = g.value(q).cols();
  const std::size_t dk = d / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dk));
  const std::vector<std::uint8_t> allowed(mask.data().begin(), mask.data().end());
  std::vector<std::size_t> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qh = g.slice_cols(q, h * dk, dk);
    const std::size_t kh = g.slice_cols(k, h * dk, dk);
    const std::size_t vh = g.slice_cols(v, h * dk, dk);
    const std::size_t scores = g.scale(g.matmul_nt(qh, kh, s), inv_sqrt, s);
    outs.push_back(g.matmul(g.masked_softmax(scores, allowed, s), vh, s));
  }
  return g.concat_cols(outs);
}

template <typename T>
std::size_t graph_feed_forward(Graph<T>& g, std::size_t x, std::size_t ln, std::size_t w1,
                               std::size_t w2, CounterSink& s) {
  const std::size_t h = g.layer_norm(x, ln, s);
  return g.add(x, g.matmul(g.relu(g.matmul(h, w1, s), s), w2, s), s);
}

template <typename T>
std::size_t graph_encoder(Graph<T>& g, const GraphParams<T>& p, const ModelConfig& config,
                          const TokenSeq& tokens, CounterSet& c) {
  if (tokens.empty() || tokens.size() > config.max_len) {
    throw LengthError("training encoder input of length " + std::to_string(tokens.size()));
  }
  std::size_t x = graph_embed(g, p, config, tokens, c);
  const AttentionMask mask = AttentionMask::full(tokens.size(), tokens.size());
  CounterSink& s = c.at(Component::encoder_self);
  for (const auto& layer : p.enc) {
    const std::size_t h = g.layer_norm(x, layer.ln_attn, s);
    const std::size_t ctx =
        graph_attention(g, g.matmul(h, layer.self.wq, s), g.matmul(h, layer.self.wk, s),
                        g.matmul(h, layer.self.wv, s), mask, config.n_heads, s);
    x = g.add(x, g.matmul(ctx, layer.self.wo, s), s);
    x = graph_feed_forward(g, x, layer.ln_ffn, layer.w1, layer.w2, c.at(Component::feed_forward));
  }
  return g.layer_norm(x, p.enc_final_ln, s);
}

struct GraphCrossKv {
  std::vector<std::size_t> k, v;
  std::size_t length = 0;
};

template <typename T>
GraphCrossKv graph_cross_kv(Graph<T>& g, const GraphParams<T>& p, std::size_t m, CounterSet& c) {
  CounterSink& s = c.at(Component::decoder_cross);
  GraphCrossKv kv;
  kv.length = g.value(m).rows();
  for (const auto& layer : p.dec) {
    kv.k.push_back(g.matmul(m, layer.cross.wk, s));
    kv.v.push_back(g.matmul(m, layer.cross.wv, s));
  }
  return kv;
}

// Logits for rows first_target .. end of the causal decoder pass.
template <typename T>
std::size_t graph_decoder(Graph<T>& g, const GraphParams<T>& p, const ModelConfig& config,
                          const GraphCrossKv& kv, const TokenSeq& tokens, std::size_t first_target,
                          CounterSet& c) {
  if (tokens.empty() || tokens.size() > config.max_len) {
    throw LengthError("training decoder input of length " + std::to_string(tokens.size()));
  }
  const std::size_t n = tokens.size();
  std::size_t x = graph_embed(g, p, config, tokens, c);
  const AttentionMask self_mask = AttentionMask::causal(n, n, 0);
  const AttentionMask cross_mask = AttentionMask::full(n, kv.length);
  for (std::size_t l = 0; l < p.dec.size(); ++l) {
    const auto& layer = p.dec[l];
    {
      CounterSink& s = c.at(Component::decoder_self);
      const std::size_t h = g.layer_norm(x, layer.ln_self, s);
      const std::size_t ctx =
          graph_attention(g, g.matmul(h, layer.self.wq, s), g.matmul(h, layer.self.wk, s),
                          g.matmul(h, layer.self.wv, s), self_mask, config.n_heads, s);
      x = g.add(x, g.matmul(ctx, layer.self.wo, s), s);
    }
    {
      CounterSink& s = c.at(Component::decoder_cross);
      const std::size_t h = g.layer_norm(x, layer.ln_cross, s);
      const std::size_t ctx = graph_attention(g, g.matmul(h, layer.cross.wq, s), kv.k[l], kv.v[l],
                                              cross_mask, config.n_heads, s);
      x = g.add(x, g.matmul(ctx, layer.cross.wo, s), s);
    }
    x = graph_feed_forward(g, x, layer.ln_ffn, layer.w1, layer.w2, c.at(Component::feed_forward));
  }
  if (first_target > 0) x = g.slice_rows(x, first_target, n - first_target);
  CounterSink& s = c.at(Component::embedding);
  return g.matmul(g.layer_norm(x, p.dec_final_ln, s), p.lm_head, s);
}

}  // namespace detail

// Loss node of one example under `layout`: the mean over its U streams of
// each stream's mean token cross-entropy.
template <typename T>
std::size_t example_loss(Graph<T>& g, const GraphParams<T>& p, const ModelConfig& config,
                         const SyntheticExample& ex, EngineKind layout, CounterSet& c) {
  const Instance& inst = ex.instance;
  if (inst.prompts.size() != ex.targets.size() || inst.prompts.empty()) {
    throw UsageError("training example needs one target per prompt");
  }
  CounterSink& loss_sink = c.at(Component::other);
  std::vector<std::size_t> losses;
  detail::GraphCrossKv shared;
  if (layout == EngineKind::pid) {
    shared = detail::graph_cross_kv(g, p, detail::graph_encoder(g, p, config, inst.input, c), c);
  }
  for (std::size_t u = 0; u < inst.prompts.size(); ++u) {
    const TokenSeq& y = ex.targets[u];
    if (y.empty()) throw UsageError("empty training target");
    detail::GraphCrossKv own;
    if (layout == EngineKind::pie) {
      own = detail::graph_cross_kv(g, p, detail::graph_encoder(g, p, config, pie_encoder_input(inst, u), c), c);
    }
    // Decoder input: prefix then the target shifted right by one.
    TokenSeq dec = decoder_prefix(layout, inst, u);
    const std::size_t first_target = dec.size() - 1;
    dec.insert(dec.end(), y.begin(), y.end() - 1);
    const std::size_t logits = detail::graph_decoder(g, p, config, layout == EngineKind::pid ? shared : own,
                                                     dec, first_target, c);
    losses.push_back(g.cross_entropy(logits, y, loss_sink));
  }
  return g.scale(g.sum_scalars(losses, loss_sink), T{1} / static_cast<T>(losses.size()), loss_sink);
}

template <typename T>
BasicWeightSet<T> zero_gradients(const ModelConfig& config) {
  return make_weight_shapes<T>(config, T{0});
}

// Loss and summed gradients of a batch (gradients averaged over examples).
template <typename T>
T batch_loss_and_gradients(const ModelConfig& config, const BasicWeightSet<T>& w,
                           const std::vector<const SyntheticExample*>& batch, EngineKind layout,
                           BasicWeightSet<T>& grads, CounterSet& c) {
  T total = 0;
  for (const SyntheticExample* ex : batch) {
    Graph<T> g;
    const GraphParams<T> p = bind_parameters(g, w, grads);
    const std::size_t loss = example_loss(g, p, config, *ex, layout, c);
    total += g.value(loss)(0, 0);
    g.backward(loss);
  }
  const T inv = T{1} / static_cast<T>(batch.size());
  for_each_parameter(grads, [&](const std::string&, std::span<T> v) {
    for (T& x : v) x *= inv;
  });
  return total * inv;
}

// One SGD step; returns the batch loss before the update. `step` numbers the
// error raised for a non-finite loss.
inline float train_step(Model& model, const std::vector<const SyntheticExample*>& batch,
                        float learning_rate, EngineKind layout, CounterSet& counters,
                        std::size_t step = 0) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  WeightSet grads = zero_gradients<float>(model.config);
  const float loss = batch_loss_and_gradients(model.config, model.weights, batch, layout, grads, counters);
  if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", step);
  std::vector<std::span<float>> gs;
  for_each_parameter(grads, [&](const std::string&, std::span<float> v) { gs.push_back(v); });
  std::size_t i = 0;
  for_each_parameter(model.weights, [&](const std::string&, std::span<float> v) {
    const std::span<float> g = gs[i++];
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= learning_rate * g[k];
  });
  return loss;
}

struct GradientCheckResult {
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

// Analytic gradients against central finite differences, in double
// precision, for `samples_per_tensor` random entries of every parameter.
inline GradientCheckResult gradient_check(const ModelConfig& config, std::uint64_t seed,
                                          const SyntheticExample& ex, EngineKind layout,
                                          std::size_t samples_per_tensor = 4, double eps = 1e-5) {
  BasicWeightSet<double> w = cast_weights<double>(init_weights(config, seed));
  // Larger weights than the default init so every path carries signal.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for_each_parameter(w, [&](const std::string&, std::span<double> v) {
    for (double& x : v) x += jitter(rng);
  });
  auto loss_at = [&](const BasicWeightSet<double>& ww) {
    BasicWeightSet<double> scratch = zero_gradients<double>(config);
    Graph<double> g;
    CounterSet c;
    const GraphParams<double> p = bind_parameters(g, ww, scratch);
    return g.value(example_loss(g, p, config, ex, layout, c))(0, 0);
  };
  BasicWeightSet<double> grads = zero_gradients<double>(config);
  CounterSet c;
  batch_loss_and_gradients<double>(config, w, {&ex}, layout, grads, c);
  std::vector<std::pair<std::string, std::span<double>>> gspans;
  for_each_parameter(grads, [&](const std::string& n, std::span<double> v) { gspans.push_back({n, v}); });

  GradientCheckResult res;
  std::size_t t = 0;
  std::vector<std::pair<std::string, std::span<double>>> wspans;
  for_each_parameter(w, [&](const std::string& n, std::span<double> v) { wspans.push_back({n, v}); });
  for (auto& [name, values] : wspans) {
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    for (std::size_t k = 0; k < samples_per_tensor; ++k) {
      const std::size_t idx = pick(rng);
      const double orig = values[idx];
      values[idx] = orig + eps;
      const double up = loss_at(w);
      values[idx] = orig - eps;
      const double down = loss_at(w);
      values[idx] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = gspans[t].second[idx];
      const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      ++res.checked;
      if (err > res.max_relative_error) {
        res.max_relative_error = err;
        res.worst_parameter = name;
      }
    }
    ++t;
  }
  return res;
}

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  float learning_rate = 0.1f;
  std::uint64_t seed = 0;
  // Stop once held-out exact match reaches this value (> 1 disables).
  double stop_at_exact_match = 2.0;
};

// Default toy training setup: the synthetic task shape and model size that
// plain SGD learns within a few minutes on one core.
struct ToyTrainingSetup {
  ModelConfig config;
  std::size_t num_prompts = 4;
  std::size_t value_len = 1;
  std::size_t instances = 2000;
  float matrix_gain = 4.0f;
  float embedding_gain = 10.0f;

  ToyTrainingSetup() {
    config.d_model = 64;
    config.n_heads = 4;
    config.n_enc_layers = 2;
    config.n_dec_layers = 2;
    config.d_ff = 128;
    config.vocab_size = 32;
    config.max_len = 64;
  }
  std::size_t input_len() const { return num_prompts * (1 + value_len); }
};

// Rescales a freshly initialized model for training. At the default
// +-0.05 range the sinusoidal positions swamp token identity and SGD stalls;
// larger weights and embeddings let content-based lookup emerge.
inline void scale_for_training(Model& model, float matrix_gain, float embedding_gain) {
  for_each_parameter(model.weights, [&](const std::string& name, std::span<float> v) {
    if (name.find("ln") != std::string::npos) return;
    const float k = name == "embedding" ? embedding_gain : matrix_gain;
    for (float& x : v) x *= k;
  });
}

inline Model make_training_model(const ToyTrainingSetup& setup, std::uint64_t seed) {
  Model m = Model::create(setup.config, seed);
  scale_for_training(m, setup.matrix_gain, setup.embedding_gain);
  return m;
}

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  CounterSet counters;  // forward + backward work of this epoch
  double heldout_exact_match = 0.0;
};

struct TrainReport {
  EngineKind layout = EngineKind::pid;
  std::vector<EpochStats> epochs;
  double initial_exact_match = 0.0;
  double final_exact_match = 0.0;
};

// Trains `model` in place on task.train and evaluates held-out exact match
// after every epoch (with the engine matching the layout).
inline TrainReport train(Model& model, const SyntheticTask& task, EngineKind layout,
                         const TrainOptions& opts) {
  if (opts.batch_size == 0) throw UsageError("batch size must be >= 1");
  TrainReport rep;
  rep.layout = layout;
  rep.initial_exact_match = exact_match(model, task.heldout, layout);
  rep.final_exact_match = rep.initial_exact_match;
  std::vector<std::size_t> order(task.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0;
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    std::mt19937_64 rng(opts.seed * 1000003ull + e);
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats st;
    st.epoch = e + 1;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += opts.batch_size) {
      std::vector<const SyntheticExample*> batch;
      for (std::size_t i = first; i < std::min(order.size(), first + opts.batch_size); ++i) {
        batch.push_back(&task.train[order[i]]);
      }
      loss_sum += train_step(model, batch, opts.learning_rate, layout, st.counters, step++);
      ++batches;
    }
    st.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    st.heldout_exact_match = exact_match(model, task.heldout, layout);
    rep.final_exact_match = st.heldout_exact_match;
    rep.epochs.push_back(std::move(st));
    if (rep.final_exact_match >= opts.stop_at_exact_match) break;
  }
  return rep;
}

}  // namespace encdec
