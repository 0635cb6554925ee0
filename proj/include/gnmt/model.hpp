// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gnmt/common.hpp"
#include "gnmt/lstm.hpp"
#include "gnmt/segmentation.hpp"
#include "gnmt/tensor.hpp"

namespace gnmt {

struct ModelConfig {
  int encoder_layers = 4;  // the bottom layer is bi-directional
  int decoder_layers = 4;
  int hidden_size = 64;
  int embedding_size = 64;
  int residual_start_layer = 3;
  int vocab_size = 0;
  int attention_hidden = 64;
  double logit_clip = 25.0;       // gamma; infinity disables
  double accumulator_clip = 1.0;  // delta at inference; infinity disables
  TokenId bos_id = kBosId;
  TokenId eos_id = kEosId;

  void validate() const;
  bool clip_trained() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttentionParams {
  Tensor2D w_query;  // A x h, applied to the previous bottom decoder output
  Tensor2D w_key;    // A x h, applied to each encoder output
  Tensor2D bias;     // A x 1
  Tensor2D v;        // 1 x A

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

/// All trainable weights. Tensor shapes are a pure function of ModelConfig.
struct ModelParams {
  Tensor2D source_embedding;  // V x E
  Tensor2D target_embedding;  // V x E
  LstmCellParams encoder_forward;
  LstmCellParams encoder_backward;
  std::vector<LstmCellParams> encoder;  // layers 2..L
  std::vector<LstmCellParams> decoder;  // layers 1..L
  AttentionParams attention;
  Tensor2D softmax_w;  // V x 2h, consumes [top decoder output; context]

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams init_uniform(const ModelConfig& config, std::uint64_t seed);

  /// Visits every tensor in a fixed order with a stable name.
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  std::vector<Tensor2D*> tensors();
  std::vector<const Tensor2D*> tensors() const;

  void scale(double factor);
  /// this += factor * other
  void add_scaled(const ModelParams& other, double factor);
  void set_zero();
  double squared_norm() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    auto cell = [&f](const std::string& prefix, auto& c) {
      f(prefix + ".w_ih", c.w_ih);
      f(prefix + ".w_hh", c.w_hh);
      f(prefix + ".bias", c.bias);
    };
    f(std::string("source_embedding"), self.source_embedding);
    f(std::string("target_embedding"), self.target_embedding);
    cell("encoder.1.fwd", self.encoder_forward);
    cell("encoder.1.bwd", self.encoder_backward);
    for (std::size_t i = 0; i < self.encoder.size(); ++i) cell("encoder." + std::to_string(i + 2), self.encoder[i]);
    for (std::size_t i = 0; i < self.decoder.size(); ++i) cell("decoder." + std::to_string(i + 1), self.decoder[i]);
    f(std::string("attention.w_query"), self.attention.w_query);
    f(std::string("attention.w_key"), self.attention.w_key);
    f(std::string("attention.bias"), self.attention.bias);
    f(std::string("attention.v"), self.attention.v);
    f(std::string("softmax.w"), self.softmax_w);
  }
};

/// Top encoder layer outputs, one vector per source token, plus the
/// attention keys precomputed from them.
struct EncoderOutput {
  std::vector<std::vector<double>> vectors;
  std::vector<std::vector<double>> keys;

  std::size_t size() const { return vectors.size(); }
};

struct AttentionResult {
  std::vector<double> context;
  std::vector<double> probs;
};

struct DecoderState {
  std::vector<LstmState> layers;
  std::vector<double> bottom_output;  // y_{i-1}, feeds the next attention query
  std::vector<double> context;        // a_i of the last step
  std::vector<double> attention;      // attention distribution of the last step
};

struct StepResult {
  DecoderState state;
  std::vector<double> log_probs;
};

/// Clipping and dropout settings for one forward pass.
struct ForwardOptions {
  double delta = kNoClip;
  double gamma = kNoClip;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;

  /// Inference settings recorded in the config.
  static ForwardOptions inference(const ModelConfig& config) { return {config.accumulator_clip, config.logit_clip}; }
};

EncoderOutput encode(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& config);
EncoderOutput encode(std::span<const TokenId> tokens, const ModelParams& params, const ModelConfig& config,
                     const ForwardOptions& options);

/// Every encoder layer's outputs, [layer - 1][t]; layer 1 is the 2h-wide
/// concatenation of the forward and backward passes.
std::vector<std::vector<std::vector<double>>> encoder_layer_outputs(std::span<const TokenId> tokens,
                                                                    const ModelParams& params,
                                                                    const ModelConfig& config,
                                                                    const ForwardOptions& options);

AttentionResult attention(std::span<const double> y_prev, const EncoderOutput& enc, const ModelParams& params);
AttentionResult attention(std::span<const double> y_prev, const EncoderOutput& enc, const AttentionParams& params);

/// Wraps top-layer vectors and precomputes their attention keys.
EncoderOutput make_encoder_output(std::vector<std::vector<double>> vectors, const AttentionParams& params);

DecoderState initial_decoder_state(const ModelConfig& config);

StepResult decode_step(const DecoderState& state, TokenId prev_token, const EncoderOutput& enc,
                       const ModelParams& params, const ModelConfig& config);
StepResult decode_step(const DecoderState& state, TokenId prev_token, const EncoderOutput& enc,
                       const ModelParams& params, const ModelConfig& config, const ForwardOptions& options);

/// log P(target | source); the target must end with EOS.
double sequence_log_prob(std::span<const TokenId> source, std::span<const TokenId> target, const ModelParams& params,
                         const ModelConfig& config);

/// Same as sequence_log_prob but accepts a target truncated before EOS.
double prefix_log_prob(std::span<const TokenId> source, std::span<const TokenId> target, const ModelParams& params,
                       const ModelConfig& config, const ForwardOptions& options);

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Negative log-likelihood of the target and its gradient.
LossAndGrads forward_backward(std::span<const TokenId> source, std::span<const TokenId> target,
                              const ModelParams& params, const ModelConfig& config, const ForwardOptions& options);

/// Accumulating form: grads += weight * d(-log P)/d(params). Returns -log P.
/// With require_eos false the target may be a truncated sample.
double accumulate_gradients(std::span<const TokenId> source, std::span<const TokenId> target,
                            const ModelParams& params, const ModelConfig& config, const ForwardOptions& options,
                            double weight, ModelParams& grads, bool require_eos = true);

/// Step-decoder adapter over float parameters for the search routines.
class FloatModel {
 public:
  using Encoded = EncoderOutput;
  using State = DecoderState;

  FloatModel(const ModelParams& params, const ModelConfig& config)
      : params_(&params), config_(config), options_(ForwardOptions::inference(config)) {}

  Encoded encode(std::span<const TokenId> tokens) const { return gnmt::encode(tokens, *params_, config_, options_); }
  State initial_state(const Encoded&) const { return initial_decoder_state(config_); }
  StepResult step(const Encoded& enc, const State& state, TokenId prev) const {
    return decode_step(state, prev, enc, *params_, config_, options_);
  }
  static const std::vector<double>& attention_of(const State& s) { return s.attention; }

  int vocab_size() const { return config_.vocab_size; }
  TokenId bos_id() const { return config_.bos_id; }
  TokenId eos_id() const { return config_.eos_id; }
  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return *params_; }

 private:
  const ModelParams* params_;
  ModelConfig config_;
  ForwardOptions options_;
};

}  // namespace gnmt
