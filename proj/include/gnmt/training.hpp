// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnmt/checkpoint.hpp"
#include "gnmt/common.hpp"
#include "gnmt/model.hpp"

namespace gnmt {

struct SentencePair {
  TokenSeq source;
  TokenSeq target;  // ends with EOS

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct TrainConfig {
  int batch_size = 128;
  long adam_steps = 60000;
  double adam_lr = 0.0002;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double sgd_lr = 0.5;
  long anneal_start = 1200000;
  long anneal_interval = 200000;
  double anneal_factor = 0.5;
  double grad_norm_cap = 5.0;
  double dropout_prob = 0.0;
  double mix_alpha = 0.017;
  int rl_samples = 15;
  double rl_lr = 0.05;
  double rl_max_len_factor = 2.0;
  long rl_eval_interval = 50;
  int rl_patience = 3;
  long rl_max_steps = 5000;
  double delta_start = 8.0;  // annealed to ModelConfig::accumulator_clip
  long total_steps = 1000;
  long delta_anneal_steps = 0;  // steps to reach the final delta; 0 means total_steps
  std::uint64_t seed = 1;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class Phase { kAdam, kSgd, kRl };
std::string phase_name(Phase p);

struct OptimizerState {
  long step = 0;
  ModelParams m;  // Adam first moments
  ModelParams v;  // Adam second moments

  static OptimizerState fresh(const ModelConfig& config);
};

/// Clip bound for the given step. Infinity when the model is not clip-trained.
double delta_at(long step, const TrainConfig& train, const ModelConfig& model);
double learning_rate_at(long step, const TrainConfig& train);
Phase phase_at(long step, const TrainConfig& train);

/// Mean negative log-likelihood over the batch and its gradient.
LossAndGrads ml_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                     const ForwardOptions& options);

struct Sample {
  TokenSeq tokens;  // ends with EOS unless truncated at max_len
  double log_prob = 0.0;
  bool finished = false;
};

/// Ancestral sampling from the per-step distribution.
std::vector<Sample> sample_sequences(std::span<const TokenId> source, const ModelParams& params,
                                     const ModelConfig& config, int m, int max_len, std::uint64_t seed,
                                     const ForwardOptions& options);
std::vector<Sample> sample_sequences(std::span<const TokenId> source, const ModelParams& params,
                                     const ModelConfig& config, int m, int max_len, std::uint64_t seed);

/// Reward of a sampled output against the reference; both exclude EOS.
using RewardFn = std::function<double(std::span<const TokenId> output, std::span<const TokenId> reference)>;
RewardFn gleu_reward();

struct RlOptions {
  int samples = 15;
  int max_len = 0;  // 0: rl_max_len_factor x source length
  double max_len_factor = 2.0;
  std::uint64_t seed = 0;
  RewardFn reward;  // defaults to GLEU
};

/// Score-function estimate of the gradient of minus the expected reward.
/// Rewards are centred on the per-source sample mean; the reported loss is
/// minus the mean sampled reward.
LossAndGrads rl_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                     const RlOptions& rl);

/// alpha * ML + RL. `rl.samples == 0` disables the RL term.
LossAndGrads mixed_loss(std::span<const SentencePair> batch, const ModelParams& params, const ModelConfig& config,
                        double mix_alpha, const RlOptions& rl);

struct StepReport {
  long step = 0;
  Phase phase = Phase::kAdam;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
  double delta = 0.0;
};

/// One ML update: gradient, global-norm clip, Adam or SGD, schedule advance.
StepReport train_step(OptimizerState& state, std::span<const SentencePair> batch, ModelParams& params,
                      const ModelConfig& model, const TrainConfig& train);

/// Single SGD update on the mixed objective with dropout off.
StepReport rl_step(long step, std::span<const SentencePair> batch, ModelParams& params, const ModelConfig& model,
                   const TrainConfig& train);

/// Tab-separated: step, phase, loss, grad-norm, lr, delta.
void write_log_line(std::ostream& out, const StepReport& r);

/// Batch for a given step: consecutive slices of per-epoch shuffles seeded by
/// (seed, epoch), so a resumed run sees the same stream.
std::vector<SentencePair> batch_for_step(std::span<const SentencePair> data, long step, int batch_size,
                                         std::uint64_t seed);

using ProgressFn = std::function<void(const StepReport&)>;

/// Runs ML steps from state.step up to train.total_steps.
void train_ml(std::span<const SentencePair> data, ModelParams& params, OptimizerState& state,
              const ModelConfig& model, const TrainConfig& train, const ProgressFn& progress = {});

using Evaluator = std::function<double(const ModelParams&)>;

struct RefineResult {
  ModelParams params;
  double best_score = 0.0;
  double initial_score = 0.0;
  int evaluations = 0;
  long steps = 0;
};

/// Mixed-objective SGD refinement, keeping the best-scoring parameters.
RefineResult refine_with_rl(const ModelParams& params, std::span<const SentencePair> data, const Evaluator& dev_score,
                            const ModelConfig& model, const TrainConfig& train, const ProgressFn& progress = {});

/// Mean per-pair loss over a data set with the given options.
double dataset_loss(std::span<const SentencePair> data, const ModelParams& params, const ModelConfig& config,
                    const ForwardOptions& options);

// Training checkpoints carry the optimizer state alongside the parameters.
Archive make_training_archive(const ModelParams& params, const ModelConfig& model, const OptimizerState& state);
OptimizerState optimizer_from_archive(const Archive& archive, const ModelConfig& model);

}  // namespace gnmt
