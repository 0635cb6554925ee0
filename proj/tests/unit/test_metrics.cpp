// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "gnmt/metrics.hpp"
#include "helpers.hpp"

namespace gnmt {
namespace {

TokenSeq words(const std::string& s) {
  TokenSeq out;
  for (char c : s)
    if (c != ' ') out.push_back(c);
  return out;
}

// Enumerates every 1..4-gram occurrence and intersects the two multisets.
double brute_force_gleu(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0.0;
  auto grams = [](const TokenSeq& s) {
    std::map<TokenSeq, int> m;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t n = 1; n <= 4 && i + n <= s.size(); ++n) ++m[TokenSeq(s.begin() + i, s.begin() + i + n)];
    return m;
  };
  const auto ga = grams(a), gb = grams(b);
  long matches = 0, ta = 0, tb = 0;
  for (const auto& [g, n] : ga) {
    ta += n;
    auto it = gb.find(g);
    if (it != gb.end()) matches += std::min(n, it->second);
  }
  for (const auto& [g, n] : gb) tb += n;
  return std::min(static_cast<double>(matches) / ta, static_cast<double>(matches) / tb);
}

TEST(Gleu, IdenticalSequencesScoreOne) {
  EXPECT_EQ(gleu(words("a b c d e"), words("a b c d e")), 1.0);
  EXPECT_EQ(gleu(words("a"), words("a")), 1.0);
}

TEST(Gleu, DisjointSequencesScoreZero) { EXPECT_EQ(gleu(words("a b c"), words("x y z w")), 0.0); }

TEST(Gleu, HandDerivedExample) {
  // Output n-grams: 3 + 2 + 1 = 6, all matched; target n-grams: 4 + 3 + 2 + 1 = 10.
  EXPECT_DOUBLE_EQ(gleu(words("a b c"), words("a b c d")), 0.6);
}

TEST(Gleu, EmptySideScoresZero) {
  EXPECT_EQ(gleu(TokenSeq{}, words("a b")), 0.0);
  EXPECT_EQ(gleu(words("a b"), TokenSeq{}), 0.0);
}

TEST(Gleu, RepeatsAreClipped) { EXPECT_DOUBLE_EQ(gleu(words("a a a a"), words("a")), 0.1); }

TEST(Gleu, MatchesBruteForceSymmetricAndBounded) {
  Rng rng(1);
  for (int i = 0; i < 3000; ++i) {
    const TokenSeq a = testing::random_tokens(rng, rng.below(9), 4);
    const TokenSeq b = testing::random_tokens(rng, rng.below(9), 4);
    const double g = gleu(a, b);
    EXPECT_EQ(g, brute_force_gleu(a, b));
    EXPECT_EQ(g, gleu(b, a));
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0);
  }
}

TEST(NGramProfile, CountsOccurrences) {
  const NGramProfile p(words("a b a b"));
  EXPECT_EQ(p.total(1), 4u);
  EXPECT_EQ(p.total(2), 3u);
  EXPECT_EQ(p.total(4), 1u);
  EXPECT_EQ(p.counts().at(words("a b")), 2);
  for (const auto& [g, n] : p.counts()) EXPECT_GE(n, 1);
}

TEST(CorpusBleu, PerfectMatchIsOne) {
  const std::vector<TokenSeq> refs = {words("a b c d e"), words("f g h i")};
  EXPECT_DOUBLE_EQ(corpus_bleu(refs, refs), 1.0);
}

TEST(CorpusBleu, NoFourGramMatchesIsZero) {
  EXPECT_EQ(corpus_bleu({words("a b c d")}, {words("a b c e")}), 0.0);
  EXPECT_EQ(corpus_bleu({words("a b")}, {words("a b")}), 0.0);
}

TEST(CorpusBleu, TwoSentenceHandCount) {
  // Sentence 1 matches 5/6, 3/5, 2/4, 1/3 n-grams; sentence 2 matches
  // 3/3, 2/2, 1/1, 0/0. Hypothesis length 9, reference length 10.
  const std::vector<TokenSeq> hyp = {words("t c s o t m"), words("a d r")};
  const std::vector<TokenSeq> ref = {words("t c s o x m"), words("a d r y")};
  const double precisions = (8.0 / 9) * (5.0 / 7) * (3.0 / 5) * (1.0 / 3);
  const double want = std::exp(1.0 - 10.0 / 9.0) * std::pow(precisions, 0.25);
  EXPECT_NEAR(corpus_bleu(hyp, ref), want, 1e-12);
}

TEST(CorpusBleu, LengthMismatchThrows) {
  EXPECT_THROW(corpus_bleu({words("a")}, {words("a"), words("b")}), UsageError);
}

TEST(CorpusBleu, LongHypothesesAreNotPenalized) {
  BleuStats s;
  s.add(words("a b c d e f"), words("a b c d e"));
  EXPECT_EQ(s.brevity_penalty(), 1.0);
}

TEST(CorpusBleu, OrderInvariantAndBounded) {
  Rng rng(2);
  std::vector<TokenSeq> hyp, ref;
  for (int i = 0; i < 40; ++i) {
    ref.push_back(testing::random_tokens(rng, 4 + rng.below(6), 5));
    TokenSeq h = ref.back();
    if (rng.bernoulli(0.5)) h[rng.below(h.size())] = 9;
    hyp.push_back(h);
  }
  const double b = corpus_bleu(hyp, ref);
  EXPECT_GT(b, 0.0);
  EXPECT_LE(b, 1.0);
  std::vector<std::size_t> perm(hyp.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<TokenSeq> hp, rp;
  for (std::size_t i : perm) {
    hp.push_back(hyp[i]);
    rp.push_back(ref[i]);
  }
  EXPECT_DOUBLE_EQ(corpus_bleu(hp, rp), b);
}

TEST(CorpusBleu, TextInterface) {
  EXPECT_DOUBLE_EQ(corpus_bleu_text({"the cat sat on it"}, {"the cat sat on it"}), 1.0);
  EXPECT_EQ(corpus_bleu_text({"x y z w"}, {"the cat sat on it"}), 0.0);
}

}  // namespace
}  // namespace gnmt
