// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gnmt/checkpoint.hpp"
#include "gnmt/common.hpp"
#include "gnmt/decode.hpp"
#include "gnmt/metrics.hpp"
#include "gnmt/model.hpp"
#include "gnmt/training.hpp"

namespace gnmt {

inline constexpr int kFixedMax = 32767;
/// Gate pre-activations are held as 16-bit values over [-kGateRange, kGateRange].
inline constexpr double kGateRange = 16.0;

/// How 16-bit activations are reduced before a weight product. kWide keeps
/// all 16 bits (int16 x int8 products); it exists for error attribution.
enum class Narrowing { kHighByte, kRound, kWide };
std::string narrowing_name(Narrowing n);
Narrowing parse_narrowing(const std::string& s);

/// Narrowed value of v; in kWide mode v itself.
std::int32_t narrow(std::int16_t v, Narrowing mode);

/// Round half away from zero.
inline double round_half_away(double x) { return std::round(x); }

struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> q;   // row-major, entries in [-127, 127]
  std::vector<double> scales;   // s_i = max |W[i, :]|

  static QuantizedMatrix quantize(const Tensor2D& w);
  Tensor2D dequantize() const;
  std::int8_t at(std::size_t r, std::size_t c) const { return q[r * cols + c]; }

  friend bool operator==(const QuantizedMatrix&, const QuantizedMatrix&) = default;
};

/// int16 v encodes the real v * delta / 32767.
struct FixedVec16 {
  std::vector<std::int16_t> values;
  double delta = 1.0;

  /// Saturating conversion (reals beyond +-delta clamp to +-32767).
  static FixedVec16 from_real(std::span<const double> x, double delta);
  static FixedVec16 zeros(std::size_t n, double delta);
  double real(std::size_t i) const { return values[i] * delta / kFixedMax; }
  std::vector<double> to_real() const;
  std::size_t size() const { return values.size(); }

  friend bool operator==(const FixedVec16&, const FixedVec16&) = default;
};

FixedVec16 concat(const FixedVec16& a, const FixedVec16& b);
std::int16_t saturate16(double v);

struct QuantizedProduct {
  std::vector<std::int64_t> acc;
  std::vector<double> scale;  // real value of one accumulator unit, per row

  std::vector<double> to_real() const;
};

/// Integer product of 8-bit weights with narrowed 8-bit inputs.
QuantizedProduct quantized_matmul(const QuantizedMatrix& qm, const FixedVec16& x,
                                  Narrowing mode = Narrowing::kHighByte);

/// Real value of one narrowed input unit.
double narrowed_unit(double delta, Narrowing mode);

/// 65536-entry activation tables indexed by the 16-bit gate pre-activation.
/// Outputs are 16-bit fixed point over [-1, 1].
class ActivationTables {
 public:
  static const ActivationTables& get();

  std::int16_t sigmoid(std::int16_t z) const { return sigmoid_[index(z)]; }
  std::int16_t tanh(std::int16_t z) const { return tanh_[index(z)]; }
  /// Real pre-activation to table index domain.
  static std::int16_t gate_input(double z);

 private:
  ActivationTables();
  static std::size_t index(std::int16_t z) { return static_cast<std::size_t>(static_cast<int>(z) + 32768); }
  std::vector<std::int16_t> sigmoid_;
  std::vector<std::int16_t> tanh_;
};

struct QuantizedLstmCell {
  QuantizedMatrix w_ih;
  QuantizedMatrix w_hh;
  std::vector<double> bias;
  double delta = 1.0;

  static QuantizedLstmCell from_float(const LstmCellParams& p, double delta);
  std::size_t hidden_size() const { return w_hh.cols; }

  friend bool operator==(const QuantizedLstmCell&, const QuantizedLstmCell&) = default;
};

struct QLstmState {
  FixedVec16 c;
  FixedVec16 m;

  static QLstmState zeros(std::size_t h, double delta);
};

/// One cell update on fixed-point state. Throws ConfigError when delta does
/// not match the delta the cell was quantized for.
QLstmState quantized_lstm_step(const QuantizedLstmCell& cell, const QLstmState& prev, const FixedVec16& x, double delta,
                               Narrowing mode = Narrowing::kHighByte);

/// Integer softmax-layer product, rescaled to reals and clipped to [-gamma, gamma].
std::vector<double> quantized_logits(const QuantizedMatrix& w_s, const FixedVec16& y, double gamma,
                                     Narrowing mode = Narrowing::kHighByte);

/// Reduced-precision counterpart of FloatModel. Embeddings and attention stay
/// in full precision; LSTM and softmax products use 8-bit weights.
class QuantizedModel {
 public:
  using Encoded = EncoderOutput;

  struct State {
    std::vector<QLstmState> layers;
    FixedVec16 bottom_output;
    std::vector<double> context;
    std::vector<double> attention;
  };

  struct Step {
    State state;
    std::vector<double> log_probs;
  };

  QuantizedModel() = default;
  /// Uses the config's accumulator clip as delta; falls back to 1.0 (with
  /// `warning` set) for a model trained without clipping.
  static QuantizedModel from_float(const ModelParams& params, const ModelConfig& config,
                                   Narrowing mode = Narrowing::kHighByte);

  Encoded encode(std::span<const TokenId> tokens) const;
  State initial_state(const Encoded&) const;
  Step step(const Encoded& enc, const State& state, TokenId prev) const;
  static const std::vector<double>& attention_of(const State& s) { return s.attention; }

  int vocab_size() const { return config_.vocab_size; }
  TokenId bos_id() const { return config_.bos_id; }
  TokenId eos_id() const { return config_.eos_id; }
  const ModelConfig& config() const { return config_; }
  double delta() const { return delta_; }
  double gamma() const { return gamma_; }
  Narrowing narrowing() const { return narrowing_; }
  const std::string& warning() const { return warning_; }

  Archive to_archive() const;
  static QuantizedModel from_archive(const Archive& archive);
  void save(const std::filesystem::path& path) const;
  static QuantizedModel load(const std::filesystem::path& path);

  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;

 private:
  FixedVec16 embed(const Tensor2D& table, TokenId tok) const;

  ModelConfig config_;
  double delta_ = 1.0;
  double gamma_ = 25.0;
  Narrowing narrowing_ = Narrowing::kHighByte;
  std::string warning_;
  Tensor2D source_embedding_;
  Tensor2D target_embedding_;
  QuantizedLstmCell encoder_forward_;
  QuantizedLstmCell encoder_backward_;
  std::vector<QuantizedLstmCell> encoder_;
  std::vector<QuantizedLstmCell> decoder_;
  AttentionParams attention_;
  QuantizedMatrix softmax_;
};

struct ParityColumn {
  double log_perplexity = 0.0;  // mean negative log-prob per target token
  double bleu = 0.0;            // greedy decoding
};

struct ParityReport {
  ParityColumn float_path;
  ParityColumn quantized_path;
  double greedy_agreement = 0.0;  // fraction of sentences decoded identically
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::string warning;

  double log_perplexity_delta() const { return quantized_path.log_perplexity - float_path.log_perplexity; }
  double relative_log_perplexity_delta() const;
};

/// Side-by-side metrics of two step models over a corpus. Decoding is greedy
/// with the usual two-times-source-length cap.
template <StepModel A, StepModel B>
ParityReport compare_models(const A& a, const B& b, std::span<const SentencePair> corpus) {
  if (corpus.empty()) throw UsageError("parity: empty corpus");
  ParityReport rep;
  std::vector<TokenSeq> out_a, out_b, refs;
  double nll_a = 0.0, nll_b = 0.0;
  std::size_t agree = 0;
  for (const SentencePair& p : corpus) {
    nll_a -= forced_log_prob(a, p.source, p.target);
    nll_b -= forced_log_prob(b, p.source, p.target);
    rep.tokens += p.target.size();
    const int max_len = static_cast<int>(2 * p.source.size());
    TokenSeq ga = greedy_decode(a, p.source, max_len).tokens;
    TokenSeq gb = greedy_decode(b, p.source, max_len).tokens;
    if (ga == gb) ++agree;
    if (!ga.empty() && ga.back() == a.eos_id()) ga.pop_back();
    if (!gb.empty() && gb.back() == b.eos_id()) gb.pop_back();
    out_a.push_back(std::move(ga));
    out_b.push_back(std::move(gb));
    TokenSeq ref = p.target;
    if (!ref.empty() && ref.back() == a.eos_id()) ref.pop_back();
    refs.push_back(std::move(ref));
  }
  rep.sentences = corpus.size();
  rep.float_path = {nll_a / static_cast<double>(rep.tokens), corpus_bleu(out_a, refs)};
  rep.quantized_path = {nll_b / static_cast<double>(rep.tokens), corpus_bleu(out_b, refs)};
  rep.greedy_agreement = static_cast<double>(agree) / static_cast<double>(corpus.size());
  return rep;
}

ParityReport parity_report(const ModelParams& params, const ModelConfig& config, const QuantizedModel& quantized,
                           std::span<const SentencePair> corpus);

}  // namespace gnmt
