// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gnmt/common.hpp"

namespace gnmt {

inline constexpr int kMaxNgram = 4;

/// Multiset of all 1..4-grams of a sequence.
class NGramProfile {
 public:
  explicit NGramProfile(std::span<const TokenId> tokens, int max_n = kMaxNgram);

  const std::map<std::vector<TokenId>, int>& counts() const { return counts_; }
  /// Number of n-gram occurrences of order n (n = 1..max_n).
  std::size_t total(int n) const;
  /// Clipped matches of order n against another profile.
  std::size_t matches(const NGramProfile& other, int n) const;

 private:
  std::map<std::vector<TokenId>, int> counts_;
  std::array<std::size_t, kMaxNgram + 1> totals_{};
};

/// min(recall, precision) over all 1..4-gram occurrences. 0 if either side is empty.
double gleu(std::span<const TokenId> output, std::span<const TokenId> target);

struct BleuStats {
  std::array<std::size_t, kMaxNgram> matches{};
  std::array<std::size_t, kMaxNgram> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  void add(std::span<const TokenId> hyp, std::span<const TokenId> ref);
  double precision(int n) const;
  double brevity_penalty() const;
  double bleu() const;
};

/// Corpus-level BLEU-4, single reference, no smoothing. Result in [0, 1].
double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references);

/// Maps whitespace-separated words to dense ids so text can be scored.
class WordInterner {
 public:
  TokenSeq operator()(const std::string& sentence);

 private:
  std::unordered_map<std::string, TokenId> ids_;
};

double corpus_bleu_text(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

}  // namespace gnmt
