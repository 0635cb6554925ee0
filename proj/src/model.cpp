// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace gnmt {

void ModelConfig::validate() const {
  if (encoder_layers < 2) throw ConfigError("encoder_layers must be >= 2 (one bi-directional + one uni-directional)");
  if (decoder_layers < 1) throw ConfigError("decoder_layers must be >= 1");
  if (residual_start_layer < 2) throw ConfigError("residual_start_layer must be >= 2");
  if (hidden_size < 1 || embedding_size < 1 || attention_hidden < 1) throw ConfigError("layer sizes must be positive");
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (bos_id < 0 || bos_id >= vocab_size || eos_id < 0 || eos_id >= vocab_size)
    throw ConfigError("bos/eos ids must lie inside the vocabulary");
  if (!(logit_clip > 0.0)) throw ConfigError("logit_clip must be positive");
  if (!(accumulator_clip > 0.0)) throw ConfigError("accumulator_clip must be positive");
}

bool ModelConfig::clip_trained() const { return std::isfinite(accumulator_clip); }

namespace {

std::size_t enc_input_size(const ModelConfig& cfg, int layer) {
  return layer == 2 ? 2 * cfg.hidden_size : cfg.hidden_size;
}

// Layer 2 consumes the 2h-wide bi-directional output, so the first encoder
// layer that can carry a residual is layer 3.
bool enc_residual(const ModelConfig& cfg, int layer) { return layer >= std::max(cfg.residual_start_layer, 3); }
bool dec_residual(const ModelConfig& cfg, int layer) { return layer >= cfg.residual_start_layer; }

std::size_t dec_input_size(const ModelConfig& cfg, int layer) {
  return (layer == 1 ? cfg.embedding_size : cfg.hidden_size) + cfg.hidden_size;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t V = cfg.vocab_size, E = cfg.embedding_size, h = cfg.hidden_size, A = cfg.attention_hidden;
  ModelParams p;
  p.source_embedding = Tensor2D(V, E);
  p.target_embedding = Tensor2D(V, E);
  p.encoder_forward = LstmCellParams::zeros(E, h);
  p.encoder_backward = LstmCellParams::zeros(E, h);
  for (int l = 2; l <= cfg.encoder_layers; ++l) p.encoder.push_back(LstmCellParams::zeros(enc_input_size(cfg, l), h));
  for (int l = 1; l <= cfg.decoder_layers; ++l) p.decoder.push_back(LstmCellParams::zeros(dec_input_size(cfg, l), h));
  p.attention = {Tensor2D(A, h), Tensor2D(A, h), Tensor2D(A, 1), Tensor2D(1, A)};
  p.softmax_w = Tensor2D(V, 2 * h);
  return p;
}

ModelParams ModelParams::init_uniform(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zeros(cfg);
  Rng rng(seed);
  p.for_each([&](const std::string&, Tensor2D& t) {
    for (double& x : t.data()) x = rng.uniform(-kInitRange, kInitRange);
  });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor2D& t) { n += t.size(); });
  return n;
}

std::vector<Tensor2D*> ModelParams::tensors() {
  std::vector<Tensor2D*> out;
  for_each([&](const std::string&, Tensor2D& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor2D*> ModelParams::tensors() const {
  std::vector<const Tensor2D*> out;
  for_each([&](const std::string&, const Tensor2D& t) { out.push_back(&t); });
  return out;
}

void ModelParams::scale(double factor) {
  for (Tensor2D* t : tensors())
    for (double& x : t->data()) x *= factor;
}

void ModelParams::add_scaled(const ModelParams& other, double factor) {
  auto mine = tensors();
  auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw ShapeError("ModelParams::add_scaled: structure mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!mine[i]->same_shape(*theirs[i])) throw ShapeError("ModelParams::add_scaled: shape mismatch");
    auto dst = mine[i]->data();
    auto src = theirs[i]->data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += factor * src[k];
  }
}

void ModelParams::set_zero() {
  for (Tensor2D* t : tensors()) t->fill(0.0);
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for (const Tensor2D* t : tensors()) s += sum_of_squares(t->data());
  return s;
}

// ---------------------------------------------------------------------------
// Forward machinery shared by inference and training.

namespace {

using Vec = std::vector<double>;

struct LayerTrace {
  std::vector<LstmCache> cache;  // per time step
  std::vector<Vec> drop;         // dropout multipliers; empty when dropout is off
  std::vector<Vec> pre;          // layer output before the accumulator clamp
};

struct EncoderTrace {
  std::vector<Vec> emb_raw;
  std::vector<Vec> emb;
  LayerTrace fwd, bwd;
  std::vector<LayerTrace> upper;  // layers 2..L
  std::vector<std::vector<Vec>> outputs;  // outputs[l-1][t]; layer 1 is 2h wide
};

struct AttentionTrace {
  Vec query_in;
  std::vector<Vec> hidden;  // tanh activations, M x A
  Vec probs;
};

struct StepTrace {
  TokenId token = 0;
  Vec emb_raw;
  AttentionTrace att;
  Vec context;
  std::vector<LstmCache> cache;  // per layer
  std::vector<Vec> drop, pre, out;
  Vec logits_raw;
  Vec log_probs;
};

class Dropout {
 public:
  Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {}

  Vec mask(std::size_t n) {
    if (p_ <= 0.0) return {};
    Vec m(n);
    const double keep = 1.0 / (1.0 - p_);
    for (double& x : m) x = rng_.bernoulli(p_) ? 0.0 : keep;
    return m;
  }

 private:
  double p_;
  Rng rng_;
};

// out = clamp(m * drop + residual_in, delta); `pre` receives the unclamped value.
void finish_layer(std::span<const double> m, const Vec& drop, const double* residual_in, double delta, Vec& pre,
                  std::span<double> out) {
  pre.resize(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    double v = drop.empty() ? m[k] : m[k] * drop[k];
    if (residual_in) v += residual_in[k];
    pre[k] = v;
    out[k] = std::clamp(v, -delta, delta);
  }
}

void check_token(TokenId t, const ModelConfig& cfg) {
  if (t < 0 || t >= cfg.vocab_size) throw UsageError("token id " + std::to_string(t) + " outside vocabulary");
}

Vec clamp_copy(std::span<const double> v, double delta) {
  Vec out(v.begin(), v.end());
  for (double& x : out) x = std::clamp(x, -delta, delta);
  return out;
}

EncoderOutput run_encoder(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& cfg,
                          const ForwardOptions& opt, Dropout* dropout, EncoderTrace* tr) {
  if (tokens.empty()) throw UsageError("encode: empty source sequence");
  for (TokenId t : tokens) check_token(t, cfg);
  const std::size_t M = tokens.size(), h = cfg.hidden_size;
  const double delta = opt.delta;

  std::vector<Vec> emb(M);
  for (std::size_t t = 0; t < M; ++t) {
    auto row = params.source_embedding.row(tokens[t]);
    emb[t] = clamp_copy(row, delta);
    if (tr) tr->emb_raw.emplace_back(row.begin(), row.end());
  }

  std::vector<Vec> layer_out(M, Vec(2 * h));
  LstmCache scratch;
  Vec pre_scratch;
  auto run_direction = [&](const LstmCellParams& cell, bool reverse, LayerTrace* lt, std::size_t offset) {
    Vec c(h, 0.0), m(h, 0.0);
    if (lt) {
      lt->cache.resize(M);
      lt->drop.resize(M);
      lt->pre.resize(M);
    }
    for (std::size_t s = 0; s < M; ++s) {
      const std::size_t t = reverse ? M - 1 - s : s;
      LstmCache& cache = lt ? lt->cache[t] : scratch;
      lstm_forward_raw(cell, emb[t], m, c, delta, cache, c, m);
      Vec drop = dropout ? dropout->mask(h) : Vec{};
      Vec& pre = lt ? lt->pre[t] : pre_scratch;
      finish_layer(m, drop, nullptr, delta, pre, std::span<double>(layer_out[t]).subspan(offset, h));
      if (lt) lt->drop[t] = std::move(drop);
    }
  };
  run_direction(params.encoder_forward, false, tr ? &tr->fwd : nullptr, 0);
  run_direction(params.encoder_backward, true, tr ? &tr->bwd : nullptr, h);
  if (tr) {
    tr->emb = emb;
    tr->outputs.push_back(layer_out);
    tr->upper.resize(cfg.encoder_layers - 1);
  }

  for (int l = 2; l <= cfg.encoder_layers; ++l) {
    const LstmCellParams& cell = params.encoder[l - 2];
    LayerTrace* lt = tr ? &tr->upper[l - 2] : nullptr;
    if (lt) {
      lt->cache.resize(M);
      lt->drop.resize(M);
      lt->pre.resize(M);
    }
    const bool residual = enc_residual(cfg, l);
    std::vector<Vec> next(M, Vec(h));
    Vec c(h, 0.0), m(h, 0.0);
    for (std::size_t t = 0; t < M; ++t) {
      LstmCache& cache = lt ? lt->cache[t] : scratch;
      lstm_forward_raw(cell, layer_out[t], m, c, delta, cache, c, m);
      Vec drop = dropout ? dropout->mask(h) : Vec{};
      Vec& pre = lt ? lt->pre[t] : pre_scratch;
      finish_layer(m, drop, residual ? layer_out[t].data() : nullptr, delta, pre, next[t]);
      if (lt) lt->drop[t] = std::move(drop);
    }
    layer_out = std::move(next);
    if (tr) tr->outputs.push_back(layer_out);
  }

  return make_encoder_output(std::move(layer_out), params.attention);
}

AttentionResult run_attention(std::span<const double> y_prev, const EncoderOutput& enc, const AttentionParams& ap,
                              AttentionTrace* tr) {
  const std::size_t M = enc.size();
  if (M == 0) throw UsageError("attention: empty encoder output");
  if (enc.keys.size() != M) throw UsageError("attention: encoder keys missing");
  const std::size_t A = ap.v.cols();
  Vec query(ap.bias.data().begin(), ap.bias.data().end());
  matvec_add(ap.w_query, y_prev, query);

  AttentionResult res;
  res.probs.resize(M);
  if (tr) {
    tr->query_in.assign(y_prev.begin(), y_prev.end());
    tr->hidden.assign(M, Vec(A));
  }
  Vec hid(A);
  const auto v = ap.v.data();
  for (std::size_t t = 0; t < M; ++t) {
    double score = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      hid[a] = std::tanh(query[a] + enc.keys[t][a]);
      score += v[a] * hid[a];
    }
    res.probs[t] = score;
    if (tr) tr->hidden[t] = hid;
  }
  softmax_inplace(res.probs);
  const std::size_t h = enc.vectors[0].size();
  res.context.assign(h, 0.0);
  for (std::size_t t = 0; t < M; ++t)
    for (std::size_t k = 0; k < h; ++k) res.context[k] += res.probs[t] * enc.vectors[t][k];
  if (tr) tr->probs = res.probs;
  return res;
}

StepResult run_decoder_step(const DecoderState& state, TokenId token, const EncoderOutput& enc,
                            const ModelParams& params, const ModelConfig& cfg, const ForwardOptions& opt,
                            Dropout* dropout, StepTrace* tr) {
  check_token(token, cfg);
  const std::size_t h = cfg.hidden_size, E = cfg.embedding_size, L = cfg.decoder_layers;
  if (state.layers.size() != L || state.bottom_output.size() != h) throw UsageError("decode_step: state inconsistent with config");
  const double delta = opt.delta;

  AttentionResult att = run_attention(state.bottom_output, enc, params.attention, tr ? &tr->att : nullptr);

  StepResult res;
  res.state.layers.resize(L);
  auto emb_row = params.target_embedding.row(token);
  Vec input(E + h);
  for (std::size_t k = 0; k < E; ++k) input[k] = std::clamp(emb_row[k], -delta, delta);
  std::copy(att.context.begin(), att.context.end(), input.begin() + E);
  if (tr) {
    tr->token = token;
    tr->emb_raw.assign(emb_row.begin(), emb_row.end());
    tr->cache.resize(L);
    tr->drop.resize(L);
    tr->pre.resize(L);
    tr->out.resize(L);
  }

  LstmCache scratch;
  Vec pre_scratch;
  Vec below;  // output of the layer underneath
  for (std::size_t li = 0; li < L; ++li) {
    const int l = static_cast<int>(li) + 1;
    const LstmState& prev = state.layers[li];
    LstmState& next = res.state.layers[li];
    next = LstmState::zeros(h);
    LstmCache& cache = tr ? tr->cache[li] : scratch;
    if (l > 1) {
      input.resize(2 * h);
      std::copy(below.begin(), below.end(), input.begin());
      std::copy(att.context.begin(), att.context.end(), input.begin() + h);
    }
    lstm_forward_raw(params.decoder[li], input, prev.m.data(), prev.c.data(), delta, cache, next.c.data(),
                     next.m.data());
    Vec drop = dropout ? dropout->mask(h) : Vec{};
    Vec out(h);
    Vec& pre = tr ? tr->pre[li] : pre_scratch;
    finish_layer(next.m.data(), drop, (l > 1 && dec_residual(cfg, l)) ? below.data() : nullptr, delta, pre, out);
    if (tr) {
      tr->drop[li] = std::move(drop);
      tr->out[li] = out;
    }
    if (l == 1) res.state.bottom_output = out;
    below = std::move(out);
  }

  Vec softmax_in(2 * h);
  std::copy(below.begin(), below.end(), softmax_in.begin());
  std::copy(att.context.begin(), att.context.end(), softmax_in.begin() + h);
  Vec logits(cfg.vocab_size, 0.0);
  matvec_add(params.softmax_w, softmax_in, logits);
  if (tr) tr->logits_raw = logits;
  for (double& z : logits) z = std::clamp(z, -opt.gamma, opt.gamma);
  log_softmax_inplace(logits);
  if (tr) {
    tr->log_probs = logits;
    tr->context = att.context;
  }
  res.log_probs = std::move(logits);
  res.state.context = std::move(att.context);
  res.state.attention = std::move(att.probs);
  return res;
}

inline double clamp_grad(double pre, double delta) { return std::abs(pre) <= delta ? 1.0 : 0.0; }

// Backward through one stacked layer over time. `d_out[t]` is the gradient
// with respect to the layer output at t; gradients with respect to the layer
// input accumulate into `d_in[t]`.
void layer_backward(const LstmCellParams& cell, LstmCellParams& grads, const LayerTrace& lt, bool residual,
                    double delta, const std::vector<Vec>& d_out, std::size_t out_offset, std::vector<Vec>& d_in,
                    bool reverse_time) {
  const std::size_t M = lt.cache.size();
  const std::size_t h = cell.hidden_size();
  Vec dm_carry(h, 0.0), dc_carry(h, 0.0), dm(h), dm_prev(h), dc_prev(h);
  for (std::size_t s = 0; s < M; ++s) {
    // Undo the forward processing order.
    const std::size_t t = reverse_time ? s : M - 1 - s;
    const Vec& drop = lt.drop[t];
    for (std::size_t k = 0; k < h; ++k) {
      const double g = d_out[t][out_offset + k] * clamp_grad(lt.pre[t][k], delta);
      if (residual) d_in[t][k] += g;
      dm[k] = (drop.empty() ? g : g * drop[k]) + dm_carry[k];
    }
    std::fill(dm_prev.begin(), dm_prev.end(), 0.0);
    std::fill(dc_prev.begin(), dc_prev.end(), 0.0);
    lstm_backward_raw(cell, lt.cache[t], dm, dc_carry, grads, d_in[t], dm_prev, dc_prev);
    dm_carry.swap(dm_prev);
    dc_carry.swap(dc_prev);
  }
}

void encoder_backward(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& cfg,
                      const ForwardOptions& opt, const EncoderTrace& tr, std::vector<Vec> d_top, ModelParams& grads) {
  const std::size_t M = tokens.size(), h = cfg.hidden_size, E = cfg.embedding_size;
  std::vector<Vec> d_out = std::move(d_top);
  for (int l = cfg.encoder_layers; l >= 2; --l) {
    std::vector<Vec> d_in(M, Vec(enc_input_size(cfg, l), 0.0));
    layer_backward(params.encoder[l - 2], grads.encoder[l - 2], tr.upper[l - 2], enc_residual(cfg, l), opt.delta,
                   d_out, 0, d_in, false);
    d_out = std::move(d_in);
  }
  std::vector<Vec> d_emb(M, Vec(E, 0.0));
  layer_backward(params.encoder_forward, grads.encoder_forward, tr.fwd, false, opt.delta, d_out, 0, d_emb, false);
  layer_backward(params.encoder_backward, grads.encoder_backward, tr.bwd, false, opt.delta, d_out, h, d_emb, true);
  for (std::size_t t = 0; t < M; ++t) {
    auto row = grads.source_embedding.row(tokens[t]);
    for (std::size_t k = 0; k < E; ++k) row[k] += d_emb[t][k] * clamp_grad(tr.emb_raw[t][k], opt.delta);
  }
}

// Returns the gradient with respect to the attention query input.
Vec attention_backward(const AttentionTrace& tr, std::span<const double> d_ctx, const EncoderOutput& enc,
                       const ModelParams& params, ModelParams& grads, std::vector<Vec>& d_keys,
                       std::vector<Vec>& d_enc) {
  const std::size_t M = enc.size(), h = d_ctx.size();
  const auto& ap = params.attention;
  const std::size_t A = ap.v.cols();
  Vec dp(M);
  double weighted = 0.0;
  for (std::size_t t = 0; t < M; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
      s += d_ctx[k] * enc.vectors[t][k];
      d_enc[t][k] += tr.probs[t] * d_ctx[k];
    }
    dp[t] = s;
    weighted += tr.probs[t] * s;
  }
  Vec du_sum(A, 0.0);
  auto v = ap.v.data();
  auto dv = grads.attention.v.data();
  for (std::size_t t = 0; t < M; ++t) {
    const double ds = tr.probs[t] * (dp[t] - weighted);
    if (ds == 0.0) continue;
    for (std::size_t a = 0; a < A; ++a) {
      const double hv = tr.hidden[t][a];
      dv[a] += ds * hv;
      const double du = ds * v[a] * (1.0 - hv * hv);
      du_sum[a] += du;
      d_keys[t][a] += du;
    }
  }
  auto db = grads.attention.bias.data();
  for (std::size_t a = 0; a < A; ++a) db[a] += du_sum[a];
  outer_add(grads.attention.w_query, du_sum, tr.query_in);
  Vec d_query(tr.query_in.size(), 0.0);
  matvec_t_add(ap.w_query, du_sum, d_query);
  return d_query;
}

double run_sequence(std::span<const TokenId> source, std::span<const TokenId> target, const ModelParams& params,
                    const ModelConfig& cfg, const ForwardOptions& opt, bool require_eos, double weight,
                    ModelParams* grads) {
  cfg.validate();
  if (target.empty()) throw UsageError("target sequence is empty");
  if (require_eos && target.back() != cfg.eos_id) throw UsageError("target sequence must end with EOS");
  for (TokenId t : target) check_token(t, cfg);

  std::optional<Dropout> dropout;
  if (grads && opt.dropout > 0.0) dropout.emplace(opt.dropout, opt.dropout_seed);
  Dropout* dp = dropout ? &*dropout : nullptr;

  EncoderTrace enc_tr;
  const EncoderOutput enc = run_encoder(source, params, cfg, opt, dp, grads ? &enc_tr : nullptr);

  const std::size_t N = target.size();
  std::vector<StepTrace> steps(grads ? N : 0);
  DecoderState state = initial_decoder_state(cfg);
  double log_prob = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const TokenId prev = i == 0 ? cfg.bos_id : target[i - 1];
    StepResult r = run_decoder_step(state, prev, enc, params, cfg, opt, dp, grads ? &steps[i] : nullptr);
    log_prob += r.log_probs[target[i]];
    state = std::move(r.state);
  }
  if (!grads) return -log_prob;

  const std::size_t M = source.size(), h = cfg.hidden_size, E = cfg.embedding_size, L = cfg.decoder_layers;
  const std::size_t V = cfg.vocab_size, A = cfg.attention_hidden;
  std::vector<Vec> d_keys(M, Vec(A, 0.0)), d_enc(M, Vec(h, 0.0));
  std::vector<Vec> dm_carry(L, Vec(h, 0.0)), dc_carry(L, Vec(h, 0.0));
  Vec d_bottom_next(h, 0.0);
  Vec dlogits(V), softmax_in(2 * h), d_softmax_in(2 * h);
  std::vector<Vec> d_out(L, Vec(h));
  Vec dm(h), dm_prev(h), dc_prev(h);

  for (std::size_t i = N; i-- > 0;) {
    const StepTrace& st = steps[i];
    for (std::size_t j = 0; j < V; ++j) {
      double g = std::exp(st.log_probs[j]) - (static_cast<TokenId>(j) == target[i] ? 1.0 : 0.0);
      if (std::abs(st.logits_raw[j]) > opt.gamma) g = 0.0;
      dlogits[j] = weight * g;
    }
    std::copy(st.out[L - 1].begin(), st.out[L - 1].end(), softmax_in.begin());
    std::copy(st.context.begin(), st.context.end(), softmax_in.begin() + h);
    outer_add(grads->softmax_w, dlogits, softmax_in);
    std::fill(d_softmax_in.begin(), d_softmax_in.end(), 0.0);
    matvec_t_add(params.softmax_w, dlogits, d_softmax_in);

    Vec d_ctx(d_softmax_in.begin() + h, d_softmax_in.end());
    for (auto& d : d_out) std::fill(d.begin(), d.end(), 0.0);
    std::copy(d_softmax_in.begin(), d_softmax_in.begin() + h, d_out[L - 1].begin());
    Vec d_emb(E, 0.0);

    for (std::size_t li = L; li-- > 0;) {
      const int l = static_cast<int>(li) + 1;
      if (l == 1)
        for (std::size_t k = 0; k < h; ++k) d_out[0][k] += d_bottom_next[k];
      const Vec& drop = st.drop[li];
      const bool residual = l > 1 && dec_residual(cfg, l);
      for (std::size_t k = 0; k < h; ++k) {
        const double g = d_out[li][k] * clamp_grad(st.pre[li][k], opt.delta);
        if (residual) d_out[li - 1][k] += g;
        dm[k] = (drop.empty() ? g : g * drop[k]) + dm_carry[li][k];
      }
      Vec d_in(dec_input_size(cfg, l), 0.0);
      std::fill(dm_prev.begin(), dm_prev.end(), 0.0);
      std::fill(dc_prev.begin(), dc_prev.end(), 0.0);
      lstm_backward_raw(params.decoder[li], st.cache[li], dm, dc_carry[li], grads->decoder[li], d_in, dm_prev,
                        dc_prev);
      dm_carry[li] = dm_prev;
      dc_carry[li] = dc_prev;
      const std::size_t below = l == 1 ? E : h;
      if (l == 1)
        std::copy(d_in.begin(), d_in.begin() + E, d_emb.begin());
      else
        for (std::size_t k = 0; k < h; ++k) d_out[li - 1][k] += d_in[k];
      for (std::size_t k = 0; k < h; ++k) d_ctx[k] += d_in[below + k];
    }
    auto emb_grad = grads->target_embedding.row(st.token);
    for (std::size_t k = 0; k < E; ++k) emb_grad[k] += d_emb[k] * clamp_grad(st.emb_raw[k], opt.delta);

    d_bottom_next = attention_backward(st.att, d_ctx, enc, params, *grads, d_keys, d_enc);
  }

  for (std::size_t t = 0; t < M; ++t) {
    outer_add(grads->attention.w_key, d_keys[t], enc.vectors[t]);
    matvec_t_add(params.attention.w_key, d_keys[t], d_enc[t]);
  }
  encoder_backward(source, params, cfg, opt, enc_tr, std::move(d_enc), *grads);
  return -log_prob;
}

}  // namespace

EncoderOutput encode(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& config) {
  return encode(tokens, params, config, ForwardOptions::inference(config));
}

EncoderOutput encode(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& config,
                     const ForwardOptions& options) {
  return run_encoder(tokens, params, config, options, nullptr, nullptr);
}

std::vector<std::vector<std::vector<double>>> encoder_layer_outputs(std::span<const TokenId> tokens,
                                                                    const ModelParams& params,
                                                                    const ModelConfig& config,
                                                                    const ForwardOptions& options) {
  EncoderTrace tr;
  run_encoder(tokens, params, config, options, nullptr, &tr);
  return std::move(tr.outputs);
}

AttentionResult attention(std::span<const double> y_prev, const EncoderOutput& enc, const ModelParams& params) {
  return run_attention(y_prev, enc, params.attention, nullptr);
}

AttentionResult attention(std::span<const double> y_prev, const EncoderOutput& enc, const AttentionParams& params) {
  return run_attention(y_prev, enc, params, nullptr);
}

EncoderOutput make_encoder_output(std::vector<std::vector<double>> vectors, const AttentionParams& params) {
  EncoderOutput out;
  out.keys.assign(vectors.size(), std::vector<double>(params.w_key.rows(), 0.0));
  for (std::size_t t = 0; t < vectors.size(); ++t) matvec_add(params.w_key, vectors[t], out.keys[t]);
  out.vectors = std::move(vectors);
  return out;
}

DecoderState initial_decoder_state(const ModelConfig& config) {
  DecoderState s;
  s.layers.assign(config.decoder_layers, LstmState::zeros(config.hidden_size));
  s.bottom_output.assign(config.hidden_size, 0.0);
  s.context.assign(config.hidden_size, 0.0);
  return s;
}

StepResult decode_step(const DecoderState& state, TokenId prev_token, const EncoderOutput& enc,
                       const ModelParams& params, const ModelConfig& config) {
  return decode_step(state, prev_token, enc, params, config, ForwardOptions::inference(config));
}

StepResult decode_step(const DecoderState& state, TokenId prev_token, const EncoderOutput& enc,
                       const ModelParams& params, const ModelConfig& config, const ForwardOptions& options) {
  return run_decoder_step(state, prev_token, enc, params, config, options, nullptr, nullptr);
}

double sequence_log_prob(std::span<const TokenId> source, std::span<const TokenId> target, const ModelParams& params,
                         const ModelConfig& config) {
  return -run_sequence(source, target, params, config, ForwardOptions::inference(config), true, 1.0, nullptr);
}

double prefix_log_prob(std::span<const TokenId> source, std::span<const TokenId> target, const ModelParams& params,
                       const ModelConfig& config, const ForwardOptions& options) {
  return -run_sequence(source, target, params, config, options, false, 1.0, nullptr);
}

LossAndGrads forward_backward(std::span<const TokenId> source, std::span<const TokenId> target,
                              const ModelParams& params, const ModelConfig& config, const ForwardOptions& options) {
  LossAndGrads out{0.0, ModelParams::zeros(config)};
  out.loss = run_sequence(source, target, params, config, options, true, 1.0, &out.grads);
  return out;
}

double accumulate_gradients(std::span<const TokenId> source, std::span<const TokenId> target,
                            const ModelParams& params, const ModelConfig& config, const ForwardOptions& options,
                            double weight, ModelParams& grads, bool require_eos) {
  return run_sequence(source, target, params, config, options, require_eos, weight, &grads);
}

}  // namespace gnmt
