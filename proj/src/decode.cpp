// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/decode.hpp"

#include <functional>
#include <map>

namespace gnmt {

void ScoreParams::validate() const {
  if (!(lp_alpha >= 0.0 && lp_alpha <= 1.0)) throw ConfigError("lp_alpha must lie in [0, 1]");
  if (!(cp_beta >= 0.0)) throw ConfigError("cp_beta must be >= 0");
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (!(prune_margin > 0.0)) throw ConfigError("prune_margin must be positive");
  if (max_len < 0) throw ConfigError("max_len must be >= 0");
  if (max_len == 0 && !(max_len_factor > 0.0)) throw ConfigError("max_len_factor must be positive");
}

int ScoreParams::max_output_length(std::size_t source_length) const {
  if (max_len > 0) return max_len;
  return std::max(1, static_cast<int>(std::ceil(max_len_factor * static_cast<double>(source_length))));
}

ScoreParams ScoreParams::exhaustive(int beam_width, int max_len) {
  ScoreParams p;
  p.lp_alpha = 0.0;
  p.cp_beta = 0.0;
  p.beam_width = beam_width;
  p.prune_margin = std::numeric_limits<double>::infinity();
  p.max_len = max_len;
  return p;
}

double length_penalty(std::size_t length, double lp_alpha) {
  if (length < 1) throw UsageError("length_penalty: length must be >= 1");
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, lp_alpha);
}

double coverage_penalty(std::span<const double> attention_mass, double cp_beta) {
  if (cp_beta == 0.0) return 0.0;
  double sum = 0.0;
  for (double m : attention_mass) {
    if (m < 0.0) throw UsageError("coverage_penalty: negative attention mass");
    sum += m > 0.0 ? std::log(std::min(m, 1.0)) : kZeroCoverageLog;
  }
  return cp_beta * sum;
}

double score(const Hypothesis& hyp, const ScoreParams& params) {
  if (!hyp.finished) throw UsageError("score: hypothesis is not finished");
  return hyp.log_prob / length_penalty(hyp.tokens.size(), params.lp_alpha) +
         coverage_penalty(hyp.attention_mass, params.cp_beta);
}

bool better_hypothesis(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

int length_bucket(std::size_t n) {
  static constexpr std::size_t kBounds[] = {8, 16, 32, 64};
  int b = 0;
  for (std::size_t bound : kBounds) {
    if (n <= bound) return b;
    ++b;
  }
  return b;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<TokenSeq>& sources, int batch_cap) {
  if (batch_cap < 1) throw UsageError("batch_cap must be >= 1");
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < sources.size(); ++i) buckets[length_bucket(sources[i].size())].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (const auto& [b, idx] : buckets)
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_cap))
      out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                       idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + batch_cap)));
  return out;
}

std::vector<std::string> unk_replace(const std::vector<std::string>& output,
                                     const std::vector<std::vector<double>>& attention,
                                     const std::vector<std::string>& source_words,
                                     const std::function<bool(const std::string&)>& is_unk) {
  std::vector<std::string> out = output;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!is_unk(out[i])) continue;
    if (i >= attention.size() || attention[i].empty() || source_words.empty()) continue;
    const auto& a = attention[i];
    std::size_t best = 0;
    for (std::size_t t = 1; t < a.size(); ++t)
      if (a[t] > a[best]) best = t;
    if (best < source_words.size()) out[i] = source_words[best];
  }
  return out;
}

}  // namespace gnmt
