// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "gnmt/metrics.hpp"

namespace gnmt {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam_lr > 0.0) || !(sgd_lr > 0.0) || !(rl_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (adam_steps < 0 || total_steps < 0 || delta_anneal_steps < 0) throw ConfigError("step counts must be non-negative");
  if (anneal_interval < 1) throw ConfigError("anneal_interval must be >= 1");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) throw ConfigError("anneal_factor must lie in (0, 1]");
  if (!(grad_norm_cap > 0.0)) throw ConfigError("grad_norm_cap must be positive");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ConfigError("dropout_prob must lie in [0, 1)");
  if (!(mix_alpha >= 0.0)) throw ConfigError("mix_alpha must be >= 0");
  if (rl_samples != 0 && rl_samples < 2) throw ConfigError("rl_samples must be >= 2 (or 0 to disable)");
  if (!(delta_start > 0.0)) throw ConfigError("delta_start must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
}

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::kAdam: return "adam";
    case Phase::kSgd: return "sgd";
    case Phase::kRl: return "rl";
  }
  return "?";
}

OptimizerState OptimizerState::fresh(const ModelConfig& config) {
  return {0, ModelParams::zeros(config), ModelParams::zeros(config)};
}

double delta_at(long step, const TrainConfig& train, const ModelConfig& model) {
  if (!model.clip_trained()) return kNoClip;
  const double end = model.accumulator_clip;
  const double start = std::max(train.delta_start, end);
  const long span = train.delta_anneal_steps > 0 ? train.delta_anneal_steps : train.total_steps;
  if (span <= 1) return end;
  const double frac = std::min(1.0, static_cast<double>(std::max(step, 0L)) / static_cast<double>(span - 1));
  return frac >= 1.0 ? end : start + (end - start) * frac;
}

double learning_rate_at(long step, const TrainConfig& train) {
  if (step < train.adam_steps) return train.adam_lr;
  const long halvings = step >= train.anneal_start ? (step - train.anneal_start) / train.anneal_interval : 0;
  return train.sgd_lr * std::pow(train.anneal_factor, static_cast<double>(halvings));
}

Phase phase_at(long step, const TrainConfig& train) { return step < train.adam_steps ? Phase::kAdam : Phase::kSgd; }

namespace {

// Per-pair dropout streams are derived from options.dropout_seed.
double batch_ml(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                const ForwardOptions& options, double scale, ModelParams& grads) {
  if (batch.empty()) throw UsageError("empty batch");
  const double w = scale / static_cast<double>(batch.size());
  double loss = 0.0;
  ForwardOptions opt = options;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    opt.dropout_seed = mix_seed(options.dropout_seed, i);
    loss += accumulate_gradients(batch[i].source, batch[i].target, params, config, opt, w, grads);
  }
  return loss / static_cast<double>(batch.size());
}

std::span<const TokenId> strip_eos(std::span<const TokenId> s, TokenId eos) {
  if (!s.empty() && s.back() == eos) return s.first(s.size() - 1);
  return s;
}

double clip_in_place(ModelParams& grads, double cap) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > cap) grads.scale(cap / norm);
  return norm;
}

// Rewards are snapped to a 2^-32 grid so that centring is exact integer
// arithmetic; a constant reward shift then cancels bit for bit.
constexpr double kRewardGrid = 0x1.0p32;

}  // namespace

LossAndGrads ml_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                     const ForwardOptions& options) {
  LossAndGrads out{0.0, ModelParams::zeros(config)};
  out.loss = batch_ml(batch, params, config, options, 1.0, out.grads);
  return out;
}

std::vector<Sample> sample_sequences(std::span<const TokenId> source, const ModelParams& params,
                                     const ModelConfig& config, int m, int max_len, std::uint64_t seed) {
  return sample_sequences(source, params, config, m, max_len, seed, ForwardOptions::inference(config));
}

std::vector<Sample> sample_sequences(std::span<const TokenId> source, const ModelParams& params,
                                     const ModelConfig& config, int m, int max_len, std::uint64_t seed,
                                     const ForwardOptions& options) {
  if (m < 1) throw UsageError("sample_sequences: m must be >= 1");
  if (max_len < 1) throw UsageError("sample_sequences: max_len must be >= 1");
  const ForwardOptions opt{options.delta, options.gamma};
  const EncoderOutput enc = encode(source, params, config, opt);
  const DecoderState init = initial_decoder_state(config);
  Rng rng(seed);
  std::vector<Sample> out(m);
  std::vector<double> probs(config.vocab_size);
  for (Sample& s : out) {
    DecoderState state = init;
    TokenId prev = config.bos_id;
    for (int t = 0; t < max_len; ++t) {
      StepResult r = decode_step(state, prev, enc, params, config, opt);
      for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = std::exp(r.log_probs[j]);
      const auto tok = static_cast<TokenId>(rng.categorical(probs));
      s.log_prob += r.log_probs[tok];
      s.tokens.push_back(tok);
      if (tok == config.eos_id) {
        s.finished = true;
        break;
      }
      state = std::move(r.state);
      prev = tok;
    }
  }
  return out;
}

RewardFn gleu_reward() {
  return [](std::span<const TokenId> out, std::span<const TokenId> ref) { return gleu(out, ref); };
}

LossAndGrads rl_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                     const RlOptions& rl) {
  if (batch.empty()) throw UsageError("empty batch");
  if (rl.samples < 2) throw UsageError("rl_loss: at least two samples are needed for the baseline");
  const RewardFn reward = rl.reward ? rl.reward : gleu_reward();
  const ForwardOptions opt = ForwardOptions::inference(config);
  const auto m = static_cast<std::int64_t>(rl.samples);
  LossAndGrads out{0.0, ModelParams::zeros(config)};
  double reward_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SentencePair& pair = batch[b];
    const int max_len = rl.max_len > 0 ? rl.max_len
                                       : std::max(1, static_cast<int>(std::ceil(rl.max_len_factor *
                                                                                static_cast<double>(pair.source.size()))));
    const auto samples = sample_sequences(pair.source, params, config, rl.samples, max_len, mix_seed(rl.seed, b), opt);
    const auto ref = strip_eos(pair.target, config.eos_id);
    std::vector<std::int64_t> q(samples.size());
    std::int64_t total = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const double r = reward(strip_eos(samples[k].tokens, config.eos_id), ref);
      if (!std::isfinite(r) || std::abs(r) > 1e6) throw TrainingError("reward out of range");
      reward_sum += r;
      q[k] = std::llround(r * kRewardGrid);
      total += q[k];
    }
    // Leave-one-out centring: (m r_k - sum r) / (m (m - 1)), an unbiased
    // estimate with the sample-mean baseline.
    std::map<TokenSeq, double> weights;
    const double denom = static_cast<double>(m * (m - 1)) * kRewardGrid * static_cast<double>(batch.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const std::int64_t centred = m * q[k] - total;
      if (centred != 0) weights[samples[k].tokens] += static_cast<double>(centred) / denom;
    }
    for (const auto& [tokens, w] : weights)
      if (w != 0.0) accumulate_gradients(pair.source, tokens, params, config, opt, w, out.grads, false);
  }
  out.loss = -reward_sum / static_cast<double>(batch.size() * static_cast<std::size_t>(rl.samples));
  return out;
}

LossAndGrads mixed_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                        double mix_alpha, const RlOptions& rl) {
  if (!(mix_alpha >= 0.0)) throw UsageError("mix_alpha must be >= 0");
  LossAndGrads out{0.0, ModelParams::zeros(config)};
  if (rl.samples > 0) out = rl_loss(batch, params, config, rl);
  if (mix_alpha > 0.0) {
    LossAndGrads ml = ml_loss(batch, params, config, ForwardOptions::inference(config));
    out.grads.add_scaled(ml.grads, mix_alpha);
    out.loss += mix_alpha * ml.loss;
  }
  return out;
}

StepReport train_step(OptimizerState& state, std::span<const SentencePair> batch, ModelParams& params,
                      const ModelConfig& model, const TrainConfig& train) {
  StepReport rep;
  rep.step = state.step;
  rep.phase = phase_at(state.step, train);
  rep.lr = learning_rate_at(state.step, train);
  rep.delta = delta_at(state.step, train, model);
  ForwardOptions opt;
  opt.delta = rep.delta;
  opt.gamma = model.clip_trained() ? model.logit_clip : kNoClip;
  opt.dropout = train.dropout_prob;
  opt.dropout_seed = mix_seed(train.seed, 0xD80, static_cast<std::uint64_t>(state.step));

  ModelParams grads = ModelParams::zeros(model);
  rep.loss = batch_ml(batch, params, model, opt, 1.0, grads);
  if (!std::isfinite(rep.loss))
    throw TrainingError("non-finite loss at step " + std::to_string(state.step) + " (delta " +
                        std::to_string(rep.delta) + ", lr " + std::to_string(rep.lr) + ")");
  rep.grad_norm = clip_in_place(grads, train.grad_norm_cap);
  if (!std::isfinite(rep.grad_norm)) throw TrainingError("non-finite gradient at step " + std::to_string(state.step));

  if (rep.phase == Phase::kAdam) {
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(train.adam_beta1, t);
    const double c2 = 1.0 - std::pow(train.adam_beta2, t);
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto pd = p[i]->data();
      auto gd = g[i]->data();
      auto md = m[i]->data();
      auto vd = v[i]->data();
      for (std::size_t k = 0; k < pd.size(); ++k) {
        md[k] = train.adam_beta1 * md[k] + (1.0 - train.adam_beta1) * gd[k];
        vd[k] = train.adam_beta2 * vd[k] + (1.0 - train.adam_beta2) * gd[k] * gd[k];
        pd[k] -= rep.lr * (md[k] / c1) / (std::sqrt(vd[k] / c2) + train.adam_epsilon);
      }
    }
  } else {
    params.add_scaled(grads, -rep.lr);
  }
  ++state.step;
  return rep;
}

StepReport rl_step(long step, std::span<const SentencePair> batch, ModelParams& params, const ModelConfig& model,
                   const TrainConfig& train) {
  RlOptions rl;
  rl.samples = train.rl_samples;
  rl.max_len_factor = train.rl_max_len_factor;
  rl.seed = mix_seed(train.seed, 0x41, static_cast<std::uint64_t>(step));
  LossAndGrads lg = mixed_loss(batch, params, model, train.mix_alpha, rl);
  StepReport rep;
  rep.step = step;
  rep.phase = Phase::kRl;
  rep.loss = lg.loss;
  rep.lr = train.rl_lr;
  rep.delta = ForwardOptions::inference(model).delta;
  rep.grad_norm = clip_in_place(lg.grads, train.grad_norm_cap);
  if (!std::isfinite(rep.loss) || !std::isfinite(rep.grad_norm))
    throw TrainingError("non-finite RL objective at step " + std::to_string(step));
  params.add_scaled(lg.grads, -train.rl_lr);
  return rep;
}

void write_log_line(std::ostream& out, const StepReport& r) {
  out << r.step << '\t' << phase_name(r.phase) << '\t' << format_real(r.loss) << '\t' << format_real(r.grad_norm)
      << '\t' << format_real(r.lr) << '\t' << format_real(r.delta) << '\n';
}

std::vector<SentencePair> batch_for_step(std::span<const SentencePair> data, long step, int batch_size,
                                         std::uint64_t seed) {
  if (data.empty()) throw UsageError("empty training set");
  const std::size_t n = data.size();
  std::vector<SentencePair> out;
  out.reserve(batch_size);
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> perm(n);
  for (int k = 0; k < batch_size; ++k) {
    const std::uint64_t pos = static_cast<std::uint64_t>(step) * batch_size + k;
    const std::uint64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      Rng rng(mix_seed(seed, 0xE90C, epoch));
      rng.shuffle(perm);
      cached_epoch = epoch;
    }
    out.push_back(data[perm[pos % n]]);
  }
  return out;
}

void train_ml(std::span<const SentencePair> data, ModelParams& params, OptimizerState& state,
              const ModelConfig& model, const TrainConfig& train, const ProgressFn& progress) {
  train.validate();
  model.validate();
  while (state.step < train.total_steps) {
    const auto batch = batch_for_step(data, state.step, train.batch_size, train.seed);
    const StepReport rep = train_step(state, batch, params, model, train);
    if (progress) progress(rep);
  }
}

RefineResult refine_with_rl(const ModelParams& params, std::span<const SentencePair> data, const Evaluator& dev_score,
                            const ModelConfig& model, const TrainConfig& train, const ProgressFn& progress) {
  if (data.empty()) throw UsageError("refine_with_rl: empty training set");
  if (!dev_score) throw UsageError("refine_with_rl: missing dev evaluator");
  RefineResult res{params, dev_score(params), 0.0, 1, 0};
  res.initial_score = res.best_score;
  ModelParams current = params;
  int stale = 0;
  while (stale < train.rl_patience && res.steps < train.rl_max_steps) {
    for (long k = 0; k < train.rl_eval_interval && res.steps < train.rl_max_steps; ++k, ++res.steps) {
      const auto batch = batch_for_step(data, res.steps, train.batch_size, mix_seed(train.seed, 0x7E));
      const StepReport rep = rl_step(res.steps, batch, current, model, train);
      if (progress) progress(rep);
    }
    const double s = dev_score(current);
    ++res.evaluations;
    if (s > res.best_score) {
      res.best_score = s;
      res.params = current;
      stale = 0;
    } else {
      ++stale;
    }
  }
  return res;
}

double dataset_loss(std::span<const SentencePair> data, const ModelParams& params, const ModelConfig& config,
                    const ForwardOptions& options) {
  if (data.empty()) throw UsageError("empty data set");
  const ForwardOptions opt{options.delta, options.gamma};
  double total = 0.0;
  for (const auto& p : data) total += -prefix_log_prob(p.source, p.target, params, config, opt);
  return total / static_cast<double>(data.size());
}

Archive make_training_archive(const ModelParams& params, const ModelConfig& model, const OptimizerState& state) {
  Archive a = make_float_archive(params, model);
  a.meta["train.step"] = std::to_string(state.step);
  state.m.for_each([&](const std::string& name, const Tensor2D& t) { a.tensors.emplace_back("adam.m." + name, t); });
  state.v.for_each([&](const std::string& name, const Tensor2D& t) { a.tensors.emplace_back("adam.v." + name, t); });
  return a;
}

OptimizerState optimizer_from_archive(const Archive& archive, const ModelConfig& model) {
  OptimizerState s = OptimizerState::fresh(model);
  auto it = archive.meta.find("train.step");
  if (it == archive.meta.end()) return s;
  s.step = std::stol(it->second);
  auto load = [&](const char* prefix, ModelParams& dst) {
    dst.for_each([&](const std::string& name, Tensor2D& t) {
      const Tensor2D& src = archive.tensor(prefix + name);
      if (!src.same_shape(t)) throw FormatError("optimizer tensor '" + name + "' has the wrong shape");
      t = src;
    });
  };
  load("adam.m.", s.m);
  load("adam.v.", s.v);
  return s;
}

}  // namespace gnmt
