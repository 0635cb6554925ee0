// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "gnmt/segmentation.hpp"
#include "gnmt/utf8.hpp"
#include "helpers.hpp"

namespace gnmt {
namespace {

std::vector<std::string> single_chars(std::string_view letters, const std::string& marker = "_") {
  std::vector<std::string> out;
  for (char32_t c : utf8::decode(letters)) {
    out.push_back(marker + utf8::encode(c));
    out.push_back(utf8::encode(c));
  }
  return out;
}

const std::vector<std::string>& toy_corpus() {
  static const std::vector<std::string> c = {
      "the cat sat on the mat",         "a cat and a hat",      "the hat sat on the cat",
      "mats and hats are flat",         "that cat is fat",      "an ant ate the tart",
      "Grüße aus München",              "naïve café owners",    "tea at the café",
  };
  return c;
}

TEST(TrainWordpiece, MostFrequentPairMergesFirst) {
  // "_a a a a": pair (a, a) occurs twice, (_a, a) once, so "aa" comes
  // first; then (_a, aa) and (aa, a) tie and "_a" + "aa" sorts first.
  const std::vector<std::string> corpus(5, "aaaa");
  const std::size_t basic = basic_piece_count(corpus, 500);
  ASSERT_EQ(basic, 3u);  // _a, a, marked unknown
  const WordpieceVocab v = train_wordpiece(corpus, basic + 2);
  EXPECT_TRUE(v.id("_a"));
  EXPECT_TRUE(v.id("aa"));
  EXPECT_TRUE(v.id("_aaa"));
  EXPECT_EQ(v.size(), kNumReserved + basic + 2);
}

TEST(TrainWordpiece, NoMergesAtBasicCount) {
  const auto& corpus = toy_corpus();
  const std::size_t basic = basic_piece_count(corpus, 500);
  const WordpieceVocab v = train_wordpiece(corpus, basic);
  EXPECT_EQ(v.size(), kNumReserved + basic);
  for (std::size_t i = kNumReserved; i < v.size(); ++i) {
    const auto cps = utf8::decode(v.piece(static_cast<TokenId>(i)));
    const bool marked = cps.size() == 2 && cps[0] == U'_';
    EXPECT_TRUE(cps.size() == 1 || marked) << v.piece(static_cast<TokenId>(i));
  }
}

TEST(TrainWordpiece, ExactSizeWhenMergesAvailable) {
  const auto& corpus = toy_corpus();
  const std::size_t basic = basic_piece_count(corpus, 500);
  for (std::size_t extra : {1u, 5u, 20u}) {
    const WordpieceVocab v = train_wordpiece(corpus, basic + extra);
    EXPECT_EQ(v.size(), kNumReserved + basic + extra);
  }
}

TEST(TrainWordpiece, StopsWhenMergesRunOut) {
  const WordpieceVocab v = train_wordpiece({"ab"}, 100);
  EXPECT_LT(v.size(), kNumReserved + 100);
  EXPECT_TRUE(v.id("_ab"));
}

TEST(TrainWordpiece, TooSmallTargetIsConfigError) {
  const auto& corpus = toy_corpus();
  EXPECT_THROW(train_wordpiece(corpus, basic_piece_count(corpus, 500) - 1), ConfigError);
  EXPECT_THROW(train_wordpiece({}, 10), ConfigError);
}

TEST(TrainWordpiece, CharacterCapMapsRareCharactersToUnknown) {
  const std::vector<std::string> corpus = {"aaa bbb aaa bbb ccc z"};
  const WordpieceVocab v = train_wordpiece(corpus, 7, 2);
  EXPECT_TRUE(v.representable(U'a'));
  EXPECT_TRUE(v.representable(U'b'));
  EXPECT_FALSE(v.representable(U'z'));
  const auto pieces = v.segment_pieces("z");
  EXPECT_EQ(pieces, (std::vector<std::string>{"_\xEF\xBF\xBD"}));
}

TEST(TrainWordpiece, Deterministic) {
  const auto& corpus = toy_corpus();
  const std::size_t d = basic_piece_count(corpus, 500) + 15;
  EXPECT_EQ(train_wordpiece(corpus, d).pieces(), train_wordpiece(corpus, d).pieces());
}

TEST(TrainWordpiece, UsualSizesRaiseNoWarning) {
  EXPECT_FALSE(vocabulary_size_warning(8000));
  EXPECT_FALSE(vocabulary_size_warning(16000));
  EXPECT_FALSE(vocabulary_size_warning(32000));
  EXPECT_TRUE(vocabulary_size_warning(500));
  EXPECT_TRUE(vocabulary_size_warning(40000));
}

WordpieceVocab jet_vocab() {
  std::vector<std::string> pieces = {"_J",     "et",     "_makers", "_fe",    "ud",   "_over",  "_seat",
                                     "_width", "_with", "_big",    "_orders", "_at", "_stake"};
  for (auto& p : single_chars("Jetmakrsfudovwidhbgz")) pieces.push_back(p);
  std::sort(pieces.begin(), pieces.end());
  pieces.erase(std::unique(pieces.begin(), pieces.end()), pieces.end());
  return WordpieceVocab(pieces);
}

constexpr std::string_view kJetSentence = "Jet makers feud over seat width with big orders at stake";

TEST(Segment, JetMakersExample) {
  const WordpieceVocab v = jet_vocab();
  const auto pieces = v.segment_pieces(kJetSentence);
  const std::vector<std::string> want = {"_J",     "et",    "_makers", "_fe",     "ud",  "_over",
                                         "_seat",  "_width", "_with",  "_big",    "_orders", "_at",
                                         "_stake"};
  EXPECT_EQ(pieces, want);
}

TEST(Detokenize, JetMakersExample) {
  const WordpieceVocab v = jet_vocab();
  TokenSeq ids;
  for (const char* p : {"_J", "et", "_makers", "_fe", "ud", "_over", "_seat", "_width", "_with", "_big", "_orders",
                        "_at", "_stake"})
    ids.push_back(*v.id(p));
  EXPECT_EQ(v.detokenize(ids), kJetSentence);
}

TEST(Segment, WholeWordPieceIsOneToken) {
  const WordpieceVocab v = jet_vocab();
  EXPECT_EQ(v.segment("makers"), (TokenSeq{*v.id("_makers")}));
}

TEST(Segment, UnknownCharactersBecomeUnknownPieces) {
  const WordpieceVocab v = jet_vocab();
  const TokenId marked = *v.id("_\xEF\xBF\xBD");
  EXPECT_EQ(v.segment("ñ"), (TokenSeq{marked}));
  EXPECT_EQ(v.segment("ñÿ€"), (TokenSeq{marked, kUnknownCharId, kUnknownCharId}));
}

TEST(Segment, MarkerCharacterIsUnrepresentable) {
  const WordpieceVocab v = jet_vocab();
  EXPECT_FALSE(v.representable(U'_'));
  EXPECT_EQ(v.detokenize(v.segment("a_b")).find('_'), std::string::npos);
}

TEST(Detokenize, EmptySequenceGivesEmptySentence) { EXPECT_EQ(jet_vocab().detokenize({}), ""); }

TEST(Detokenize, BadIdsThrow) {
  const WordpieceVocab v = jet_vocab();
  const TokenSeq too_big{static_cast<TokenId>(v.size())};
  EXPECT_THROW(v.detokenize(too_big), DecodeError);
  const TokenSeq eos{kEosId};
  EXPECT_THROW(v.detokenize(eos), DecodeError);
}

TEST(Segment, RoundTripOverInventory) {
  const auto& corpus = toy_corpus();
  const WordpieceVocab v = train_wordpiece(corpus, basic_piece_count(corpus, 500) + 30);
  const auto inv = v.inventory();
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> words(1 + rng.below(6));
    for (auto& w : words) {
      std::u32string cps(1 + rng.below(7), U' ');
      for (auto& c : cps) c = inv[rng.below(inv.size())];
      w = utf8::encode(cps);
    }
    const std::string s = utf8::join_words(words);
    ASSERT_EQ(v.detokenize(v.segment(s)), s);
  }
}

TEST(Segment, SameStringSegmentsIdenticallyOnBothSides) {
  const auto& corpus = toy_corpus();
  const WordpieceVocab v = train_wordpiece(corpus, basic_piece_count(corpus, 500) + 30);
  // A name copied from source to target keeps its pieces.
  EXPECT_EQ(v.segment("the café München"), v.segment(std::vector<std::string>{"the", "café", "München"}));
  EXPECT_EQ(v.segment("München"), v.segment("München"));
}

TEST(Vocab, FileRoundTrip) {
  testing::TempDir dir;
  const auto& corpus = toy_corpus();
  const WordpieceVocab v = train_wordpiece(corpus, basic_piece_count(corpus, 500) + 10);
  v.save(dir / "vocab.txt");
  const WordpieceVocab w = WordpieceVocab::load(dir / "vocab.txt");
  EXPECT_EQ(v.pieces(), w.pieces());
  std::ifstream in(dir / "vocab.txt");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "<pad>");
}

TEST(Vocab, HeaderlessFileRejected) {
  testing::TempDir dir;
  std::ofstream(dir / "bad.txt") << "_a\na\n";
  EXPECT_THROW(WordpieceVocab::load(dir / "bad.txt"), FormatError);
}

TEST(Vocab, MarkerOnlyAsPrefix) {
  EXPECT_THROW(WordpieceVocab({"a_b"}), ConfigError);
  EXPECT_THROW(WordpieceVocab({"_"}), ConfigError);
  EXPECT_THROW(WordpieceVocab({"a", "a"}), ConfigError);
}

MixedVocabConfig mixed_config() {
  MixedVocabConfig c;
  c.word_vocab = {{"the", 4}, {"cat", 5}, {"sat", 6}};
  return c;
}


TEST(Mixed, MikiExpandsToCharacters) {
  const auto toks = encode_mixed("Miki", mixed_config());
  EXPECT_EQ(toks, (std::vector<std::string>{"<B>M", "<M>i", "<M>k", "<E>i"}));
}

TEST(Mixed, InVocabularyWordIsOneToken) {
  EXPECT_EQ(encode_mixed("cat", mixed_config()), std::vector<std::string>{"cat"});
}

TEST(Mixed, SingleCharacterWordTakesBeginPrefix) {
  EXPECT_EQ(encode_mixed("x", mixed_config()), std::vector<std::string>{"<B>x"});
}

TEST(Mixed, DecodeMiki) {
  const std::vector<std::string> toks = {"<B>M", "<M>i", "<M>k", "<E>i"};
  EXPECT_EQ(decode_mixed(toks, mixed_config()), "Miki");
}

TEST(Mixed, DanglingPrefixesThrow) {
  const std::vector<std::string> e = {"<E>i"};
  const std::vector<std::string> m = {"cat", "<M>i"};
  EXPECT_THROW(decode_mixed(e, mixed_config()), DecodeError);
  EXPECT_THROW(decode_mixed(m, mixed_config()), DecodeError);
}

TEST(Mixed, PrefixCollisionRejected) {
  MixedVocabConfig c = mixed_config();
  c.word_vocab.emplace("<B>x", 9);
  EXPECT_THROW(c.validate(), ConfigError);
  MixedVocabConfig d = mixed_config();
  d.middle_prefix = d.begin_prefix;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Mixed, EveryShortWordDecodesBack) {
  // All words of 1..4 characters over a small alphabet, next to an
  // in-vocabulary word: the inverse must be exact.
  const MixedVocabConfig c = mixed_config();
  const std::u32string alphabet = U"abé";
  std::vector<std::u32string> words = {U""};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::u32string> next;
    for (const auto& w : words)
      for (char32_t ch : alphabet) next.push_back(w + ch);
    words = next;
    for (const auto& w : words) {
      const std::string s = "the " + utf8::encode(w) + " cat " + utf8::encode(w);
      ASSERT_EQ(decode_mixed(encode_mixed(s, c), c), s);
    }
  }
}

WordVocabConfig word_config() {
  return WordVocabConfig::from_corpus({"the cat sat", "the cat"}, {"le chat", "le chat assis"}, 10, 10);
}

TEST(WordUnk, MikiBecomesUnkSymbol) {
  EXPECT_EQ(encode_word_unk("Miki", word_config()), std::vector<std::string>{"M_UNK_i"});
}

TEST(WordUnk, KnownWordPassesThrough) {
  EXPECT_EQ(encode_word_unk("the cat", word_config()), (std::vector<std::string>{"the", "cat"}));
  EXPECT_EQ(encode_word_unk("le chat", word_config(), Side::kTarget), (std::vector<std::string>{"le", "chat"}));
}

TEST(WordUnk, SameEndsCollide) {
  const auto cfg = word_config();
  EXPECT_EQ(encode_word_unk("Maui", cfg), encode_word_unk("Mali", cfg));
  EXPECT_TRUE(is_unk_symbol("M_UNK_i", cfg));
  EXPECT_FALSE(is_unk_symbol("cat", cfg));
}

TEST(WordUnk, TopKKeepsMostFrequent) {
  const auto cfg = WordVocabConfig::from_corpus({"a a a b b c"}, {"x"}, 2, 1);
  EXPECT_EQ(cfg.source_vocab.size(), 2u);
  EXPECT_TRUE(cfg.source_vocab.count("a"));
  EXPECT_TRUE(cfg.source_vocab.count("b"));
  EXPECT_FALSE(cfg.source_vocab.count("c"));
}

}  // namespace
}  // namespace gnmt
