// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gnmt/utf8.hpp"

namespace gnmt {

NGramProfile::NGramProfile(std::span<const TokenId> tokens, int max_n) {
  if (max_n < 1 || max_n > kMaxNgram) throw UsageError("NGramProfile: n must be in 1..4");
  for (int n = 1; n <= max_n; ++n) {
    if (tokens.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts_[std::vector<TokenId>(tokens.begin() + i, tokens.begin() + i + n)];
      ++totals_[n];
    }
  }
}

std::size_t NGramProfile::total(int n) const { return n >= 1 && n <= kMaxNgram ? totals_[n] : 0; }

std::size_t NGramProfile::matches(const NGramProfile& other, int n) const {
  std::size_t m = 0;
  for (const auto& [gram, c] : counts_) {
    if (static_cast<int>(gram.size()) != n) continue;
    auto it = other.counts_.find(gram);
    if (it != other.counts_.end()) m += std::min(c, it->second);
  }
  return m;
}

double gleu(std::span<const TokenId> output, std::span<const TokenId> target) {
  if (output.empty() || target.empty()) return 0.0;
  const NGramProfile out(output), tgt(target);
  std::size_t matches = 0, out_total = 0, tgt_total = 0;
  for (int n = 1; n <= kMaxNgram; ++n) {
    matches += out.matches(tgt, n);
    out_total += out.total(n);
    tgt_total += tgt.total(n);
  }
  const double recall = static_cast<double>(matches) / static_cast<double>(tgt_total);
  const double precision = static_cast<double>(matches) / static_cast<double>(out_total);
  return std::min(recall, precision);
}

void BleuStats::add(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  const NGramProfile h(hyp), r(ref);
  for (int n = 1; n <= kMaxNgram; ++n) {
    matches[n - 1] += h.matches(r, n);
    totals[n - 1] += h.total(n);
  }
  hyp_length += hyp.size();
  ref_length += ref.size();
}

double BleuStats::precision(int n) const {
  const std::size_t t = totals[n - 1];
  return t == 0 ? 0.0 : static_cast<double>(matches[n - 1]) / static_cast<double>(t);
}

double BleuStats::brevity_penalty() const {
  if (hyp_length == 0) return 0.0;
  return std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_length) / static_cast<double>(hyp_length)));
}

double BleuStats::bleu() const {
  double log_sum = 0.0;
  for (int n = 1; n <= kMaxNgram; ++n) {
    const double p = precision(n);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return brevity_penalty() * std::exp(log_sum / kMaxNgram);
}

double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references) {
  if (hypotheses.size() != references.size())
    throw UsageError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                     std::to_string(references.size()) + " references");
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) stats.add(hypotheses[i], references[i]);
  return stats.bleu();
}

TokenSeq WordInterner::operator()(const std::string& sentence) {
  TokenSeq out;
  for (const std::string& w : utf8::split_words(sentence)) {
    auto [it, inserted] = ids_.try_emplace(w, static_cast<TokenId>(ids_.size()));
    out.push_back(it->second);
  }
  return out;
}

double corpus_bleu_text(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  WordInterner intern;
  std::vector<TokenSeq> h, r;
  for (const auto& s : hypotheses) h.push_back(intern(s));
  for (const auto& s : references) r.push_back(intern(s));
  return corpus_bleu(h, r);
}

}  // namespace gnmt
