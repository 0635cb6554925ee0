// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gnmt/common.hpp"

namespace gnmt {

/// Anything that can be decoded step by step: the float model and the
/// quantized model both satisfy this.
template <class M>
concept StepModel = requires(const M& m, std::span<const TokenId> src, const typename M::Encoded& enc,
                             const typename M::State& state, TokenId tok) {
  { m.encode(src) } -> std::convertible_to<typename M::Encoded>;
  { m.initial_state(enc) } -> std::convertible_to<typename M::State>;
  { m.step(enc, state, tok).state } -> std::convertible_to<typename M::State>;
  { m.step(enc, state, tok).log_probs } -> std::convertible_to<std::vector<double>>;
  { M::attention_of(state) } -> std::convertible_to<const std::vector<double>&>;
  { m.vocab_size() } -> std::convertible_to<int>;
  { m.bos_id() } -> std::convertible_to<TokenId>;
  { m.eos_id() } -> std::convertible_to<TokenId>;
};

struct ScoreParams {
  double lp_alpha = 0.2;
  double cp_beta = 0.2;
  int beam_width = 8;
  double prune_margin = 3.0;  // natural-log units; infinity disables both prunings
  double max_len_factor = 2.0;
  int max_len = 0;  // > 0 overrides max_len_factor

  void validate() const;
  int max_output_length(std::size_t source_length) const;

  /// Plain probability search: no normalization, no pruning.
  static ScoreParams exhaustive(int beam_width, int max_len);

  friend bool operator==(const ScoreParams&, const ScoreParams&) = default;
};

/// Stand-in for log(0) so that score comparisons stay total.
inline constexpr double kZeroCoverageLog = -1e9;

double length_penalty(std::size_t length, double lp_alpha);
double coverage_penalty(std::span<const double> attention_mass, double cp_beta);

struct Hypothesis {
  TokenSeq tokens;                     // includes the final EOS once finished
  double log_prob = 0.0;
  std::vector<double> attention_mass;  // per source position
  bool finished = false;
  double score = 0.0;                  // set once finished
};

/// log P / lp(|Y|) + cp, with |Y| counting every emitted token including EOS.
double score(const Hypothesis& hyp, const ScoreParams& params);

/// Strict ranking used for n-best lists: higher score, then earlier EOS, then
/// lexicographically smaller tokens.
bool better_hypothesis(const Hypothesis& a, const Hypothesis& b);

struct BeamResult {
  std::vector<Hypothesis> nbest;  // sorted by better_hypothesis
  int steps = 0;

  const Hypothesis& best() const { return nbest.front(); }
};

/// Incremental beam search over one source sentence; advance() runs one
/// output step for every live hypothesis.
template <StepModel M>
class BeamSearch {
 public:
  BeamSearch(const M& model, std::span<const TokenId> source, const ScoreParams& params)
      : model_(&model), params_(params) {
    params_.validate();
    if (source.empty()) throw UsageError("beam_search: empty source");
    enc_ = model.encode(source);
    max_len_ = params_.max_output_length(source.size());
    Live root;
    root.hyp.attention_mass.assign(source.size(), 0.0);
    root.state = model.initial_state(enc_);
    live_.push_back(std::move(root));
  }

  bool done() const { return live_.empty(); }

  void advance() {
    if (done()) return;
    ++step_;
    const TokenId eos = model_->eos_id();
    const bool last = step_ >= max_len_;
    const auto V = static_cast<std::size_t>(model_->vocab_size());

    struct Candidate {
      std::size_t parent;
      TokenId token;
      double log_prob;
    };
    std::vector<Candidate> cands;
    std::vector<typename M::State> next_states;
    next_states.reserve(live_.size());
    for (std::size_t h = 0; h < live_.size(); ++h) {
      const Live& l = live_[h];
      const TokenId prev = l.hyp.tokens.empty() ? model_->bos_id() : l.hyp.tokens.back();
      auto r = model_->step(enc_, l.state, prev);
      double best_tok = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < V; ++j)
        if (!last || static_cast<TokenId>(j) == eos) best_tok = std::max(best_tok, r.log_probs[j]);
      for (std::size_t j = 0; j < V; ++j) {
        const auto tok = static_cast<TokenId>(j);
        if (last && tok != eos) continue;
        const double lp = r.log_probs[j];
        if (lp < best_tok - params_.prune_margin) continue;
        cands.push_back({h, tok, l.hyp.log_prob + lp});
      }
      next_states.push_back(std::move(r.state));
    }

    auto key_less = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const TokenSeq& ta = live_[a.parent].hyp.tokens;
      const TokenSeq& tb = live_[b.parent].hyp.tokens;
      if (ta != tb) return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
      return a.token < b.token;
    };
    const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(params_.beam_width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), key_less);
    cands.resize(keep);

    std::vector<Live> survivors;
    for (const Candidate& c : cands) {
      const Live& parent = live_[c.parent];
      Live child;
      child.hyp.tokens = parent.hyp.tokens;
      child.hyp.tokens.push_back(c.token);
      child.hyp.log_prob = c.log_prob;
      child.hyp.attention_mass = parent.hyp.attention_mass;
      const std::vector<double>& att = M::attention_of(next_states[c.parent]);
      for (std::size_t i = 0; i < child.hyp.attention_mass.size() && i < att.size(); ++i)
        child.hyp.attention_mass[i] += att[i];
      if (c.token == eos) {
        child.hyp.finished = true;
        child.hyp.score = score(child.hyp, params_);
        if (child.hyp.score > best_score_) best_score_ = child.hyp.score;
        finished_.push_back(std::move(child.hyp));
      } else {
        child.state = next_states[c.parent];
        survivors.push_back(std::move(child));
      }
    }

    // Global pruning and exact early stopping against the best finished score.
    std::vector<Live> kept;
    for (Live& l : survivors) {
      if (!finished_.empty()) {
        const double now = l.hyp.log_prob / length_penalty(l.hyp.tokens.size(), params_.lp_alpha) +
                           coverage_penalty(l.hyp.attention_mass, params_.cp_beta);
        if (now < best_score_ - params_.prune_margin) continue;
        // No continuation can beat this: log P only falls, lp is bounded by
        // lp(max_len) and cp never exceeds 0.
        const double bound = l.hyp.log_prob / length_penalty(static_cast<std::size_t>(max_len_), params_.lp_alpha);
        if (bound <= best_score_) continue;
      }
      kept.push_back(std::move(l));
    }
    live_ = std::move(kept);
  }

  BeamResult result() const {
    BeamResult r;
    r.nbest = finished_;
    std::sort(r.nbest.begin(), r.nbest.end(), better_hypothesis);
    r.steps = step_;
    return r;
  }

  int max_len() const { return max_len_; }

 private:
  struct Live {
    Hypothesis hyp;
    typename M::State state;
  };

  const M* model_;
  ScoreParams params_;
  typename M::Encoded enc_;
  int max_len_ = 1;
  int step_ = 0;
  std::vector<Live> live_;
  std::vector<Hypothesis> finished_;
  double best_score_ = -std::numeric_limits<double>::infinity();
};

template <StepModel M>
BeamResult beam_search(const M& model, std::span<const TokenId> source, const ScoreParams& params) {
  BeamSearch<M> search(model, source, params);
  while (!search.done()) search.advance();
  return search.result();
}

/// Source-length bucket used for batching; sentences sharing a bucket are
/// decoded together.
int length_bucket(std::size_t source_length);

/// Batches of input indices: bucketed by length, input order inside a bucket,
/// at most batch_cap sentences each.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<TokenSeq>& sources, int batch_cap);

/// Decodes every sentence; searches in a batch advance in lockstep until all
/// of them are out of beam. Results are in input order.
template <StepModel M>
std::vector<BeamResult> batch_decode(const M& model, const std::vector<TokenSeq>& sources, const ScoreParams& params,
                                     int batch_cap = 35) {
  std::vector<BeamResult> out(sources.size());
  for (const auto& batch : make_batches(sources, batch_cap)) {
    std::vector<BeamSearch<M>> searches;
    searches.reserve(batch.size());
    for (std::size_t idx : batch) searches.emplace_back(model, sources[idx], params);
    bool any = true;
    while (any) {
      any = false;
      for (auto& s : searches) {
        if (s.done()) continue;
        s.advance();
        any = true;
      }
    }
    for (std::size_t k = 0; k < batch.size(); ++k) out[batch[k]] = searches[k].result();
  }
  return out;
}

struct GreedyResult {
  TokenSeq tokens;  // ends with EOS
  double log_prob = 0.0;
  std::vector<std::vector<double>> attention;  // one distribution per output step
};

/// Argmax decoding (lowest id on ties), EOS forced at max_len.
template <StepModel M>
GreedyResult greedy_decode(const M& model, std::span<const TokenId> source, int max_len) {
  if (max_len < 1) throw UsageError("greedy_decode: max_len must be >= 1");
  const auto enc = model.encode(source);
  auto state = model.initial_state(enc);
  GreedyResult g;
  TokenId prev = model.bos_id();
  for (int t = 1; t <= max_len; ++t) {
    auto r = model.step(enc, state, prev);
    TokenId best = model.eos_id();
    if (t < max_len) {
      best = 0;
      for (std::size_t j = 1; j < r.log_probs.size(); ++j)
        if (r.log_probs[j] > r.log_probs[best]) best = static_cast<TokenId>(j);
    }
    g.log_prob += r.log_probs[best];
    g.tokens.push_back(best);
    g.attention.push_back(M::attention_of(r.state));
    if (best == model.eos_id()) break;
    state = std::move(r.state);
    prev = best;
  }
  return g;
}

/// Teacher-forced log P(target | source) through the step interface.
template <StepModel M>
double forced_log_prob(const M& model, std::span<const TokenId> source, std::span<const TokenId> target) {
  const auto enc = model.encode(source);
  auto state = model.initial_state(enc);
  double lp = 0.0;
  TokenId prev = model.bos_id();
  for (TokenId tok : target) {
    auto r = model.step(enc, state, prev);
    lp += r.log_probs.at(static_cast<std::size_t>(tok));
    state = std::move(r.state);
    prev = tok;
  }
  return lp;
}

/// Replaces each UNK output word by the source word with the highest
/// attention at that step (lowest index on ties).
std::vector<std::string> unk_replace(const std::vector<std::string>& output,
                                     const std::vector<std::vector<double>>& attention,
                                     const std::vector<std::string>& source_words,
                                     const std::function<bool(const std::string&)>& is_unk);

}  // namespace gnmt
