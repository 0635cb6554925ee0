// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnmt/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "gnmt/utf8.hpp"

namespace gnmt {

namespace {

char32_t single_char(std::string_view s, std::string_view what) {
  const auto cps = utf8::decode(s);
  if (cps.size() != 1) throw ConfigError(std::string(what) + " must be a single character");
  return cps[0];
}

}  // namespace

WordpieceVocab::WordpieceVocab(std::vector<std::string> pieces, std::string marker)
    : marker_(std::move(marker)), marker_char_(single_char(marker_, "boundary marker")) {
  pieces_ = {std::string(kPadSymbol), std::string(kBosSymbol), std::string(kEosSymbol), utf8::encode(kUnknownChar)};
  const std::string marked_unknown = marker_ + utf8::encode(kUnknownChar);
  if (std::find(pieces.begin(), pieces.end(), marked_unknown) == pieces.end()) pieces.push_back(marked_unknown);
  for (auto& p : pieces) pieces_.push_back(std::move(p));

  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const std::string& p = pieces_[i];
    if (p.empty()) throw ConfigError("vocabulary: empty piece at id " + std::to_string(i));
    if (!index_.emplace(p, static_cast<TokenId>(i)).second)
      throw ConfigError("vocabulary: duplicate piece '" + p + "'");
    if (i < kNumReserved) continue;
    const auto cps = utf8::decode(p);
    if (p == marker_) throw ConfigError("vocabulary: bare boundary marker is not a piece");
    if (std::find(cps.begin() + 1, cps.end(), marker_char_) != cps.end())
      throw ConfigError("vocabulary: marker inside piece '" + p + "'");
    max_piece_chars_ = std::max(max_piece_chars_, cps.size());
  }
}

WordpieceVocab WordpieceVocab::load(const std::filesystem::path& path, std::string marker) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < kNumReserved || lines[0] != kPadSymbol || lines[1] != kBosSymbol || lines[2] != kEosSymbol ||
      lines[3] != utf8::encode(kUnknownChar))
    throw FormatError("vocabulary file " + path.string() + " lacks the reserved header");
  return WordpieceVocab(std::vector<std::string>(lines.begin() + kNumReserved, lines.end()), std::move(marker));
}

void WordpieceVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write vocabulary file " + path.string());
  for (const auto& p : pieces_) out << p << '\n';
}

const std::string& WordpieceVocab::piece(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) throw DecodeError("unknown token id " + std::to_string(id));
  return pieces_[id];
}

std::optional<TokenId> WordpieceVocab::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool WordpieceVocab::representable(char32_t c) const {
  if (c == marker_char_) return false;
  const std::string s = utf8::encode(c);
  return index_.count(s) && index_.count(marker_ + s);
}

std::vector<char32_t> WordpieceVocab::inventory() const {
  std::vector<char32_t> out;
  for (std::size_t i = kNumReserved; i < pieces_.size(); ++i) {
    const auto cps = utf8::decode(pieces_[i]);
    if (cps.size() == 1 && cps[0] != kUnknownChar && representable(cps[0])) out.push_back(cps[0]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void WordpieceVocab::segment_word(std::u32string_view word, TokenSeq& out) const {
  std::u32string marked;
  marked.reserve(word.size() + 1);
  marked.push_back(marker_char_);
  for (char32_t c : word) marked.push_back(representable(c) ? c : kUnknownChar);

  std::size_t pos = 0;
  while (pos < marked.size()) {
    // The marker never stands alone: a word-initial match covers at least
    // the marker plus one character.
    const std::size_t min_len = pos == 0 ? 2 : 1;
    const std::size_t max_len = std::min(max_piece_chars_, marked.size() - pos);
    bool matched = false;
    for (std::size_t len = max_len; len >= min_len; --len) {
      auto it = index_.find(utf8::encode(std::u32string_view(marked).substr(pos, len)));
      if (it != index_.end() && it->second >= static_cast<TokenId>(kNumReserved - 1)) {
        out.push_back(it->second);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) throw Error("segment: vocabulary violates the character-inventory invariant");
  }
}

TokenSeq WordpieceVocab::segment(const std::vector<std::string>& words) const {
  TokenSeq out;
  for (const auto& w : words) segment_word(utf8::decode(w), out);
  return out;
}

TokenSeq WordpieceVocab::segment(std::string_view sentence) const { return segment(utf8::split_words(sentence)); }

std::vector<std::string> WordpieceVocab::segment_pieces(std::string_view sentence) const {
  std::vector<std::string> out;
  for (TokenId id : segment(sentence)) out.push_back(pieces_[id]);
  return out;
}

std::string WordpieceVocab::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  bool first = true;
  for (TokenId id : ids) {
    const std::string& p = piece(id);
    if (id < static_cast<TokenId>(kNumReserved - 1)) throw DecodeError("detokenize: control symbol " + p);
    if (p.compare(0, marker_.size(), marker_) == 0) {
      if (!first) out.push_back(' ');
      out.append(p, marker_.size());
    } else {
      out += p;
    }
    first = false;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct CharInventory {
  std::vector<char32_t> chars;  // sorted by code point
  std::set<char32_t> lookup;
};

CharInventory collect_inventory(const std::map<std::u32string, long>& words, std::size_t char_cap, char32_t marker) {
  std::map<char32_t, long> freq;
  for (const auto& [w, n] : words)
    for (char32_t c : w)
      if (c != marker && c != kUnknownChar) freq[c] += n;
  std::vector<std::pair<char32_t, long>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > char_cap) ranked.resize(char_cap);
  CharInventory inv;
  for (const auto& [c, n] : ranked) inv.chars.push_back(c);
  std::sort(inv.chars.begin(), inv.chars.end());
  inv.lookup.insert(inv.chars.begin(), inv.chars.end());
  return inv;
}

std::map<std::u32string, long> count_words(const std::vector<std::string>& corpus) {
  std::map<std::u32string, long> words;
  for (const auto& sentence : corpus)
    for (const auto& w : utf8::split_words(sentence)) ++words[utf8::decode(w)];
  return words;
}

}  // namespace

std::size_t basic_piece_count(const std::vector<std::string>& corpus, std::size_t char_cap, std::string_view marker) {
  const auto inv = collect_inventory(count_words(corpus), char_cap, single_char(marker, "boundary marker"));
  return 2 * inv.chars.size() + 1;
}

WordpieceVocab train_wordpiece(const std::vector<std::string>& corpus, std::size_t desired_tokens,
                               std::size_t char_cap, std::string marker) {
  if (corpus.empty()) throw ConfigError("train_wordpiece: empty corpus");
  const char32_t marker_char = single_char(marker, "boundary marker");
  const auto word_counts = count_words(corpus);
  if (word_counts.empty()) throw ConfigError("train_wordpiece: corpus has no words");
  const auto inv = collect_inventory(word_counts, char_cap, marker_char);

  std::vector<std::string> pieces;
  std::unordered_map<std::string, int> index;
  auto add_piece = [&](const std::string& p) {
    auto [it, inserted] = index.emplace(p, static_cast<int>(pieces.size()));
    if (inserted) pieces.push_back(p);
    return it->second;
  };
  for (char32_t c : inv.chars) {
    add_piece(marker + utf8::encode(c));
    add_piece(utf8::encode(c));
  }
  add_piece(marker + utf8::encode(kUnknownChar));
  // The unmarked unknown character is a reserved entry; keep it addressable
  // during merging under a local id and drop it from the emitted list.
  const int unk_local = add_piece(utf8::encode(kUnknownChar));
  const std::size_t basic = pieces.size() - 1;
  if (desired_tokens < basic)
    throw ConfigError("train_wordpiece: desired_tokens " + std::to_string(desired_tokens) +
                      " is smaller than the basic character inventory (" + std::to_string(basic) + ")");

  struct Word {
    std::vector<int> symbols;
    long count;
  };
  std::vector<Word> words;
  for (const auto& [w, n] : word_counts) {
    Word word{{}, n};
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool known = inv.lookup.count(w[i]) > 0;
      const std::string ch = utf8::encode(known ? w[i] : kUnknownChar);
      word.symbols.push_back(i == 0 ? index.at(marker + ch) : (known ? index.at(ch) : unk_local));
    }
    words.push_back(std::move(word));
  }

  std::size_t emitted = basic;
  while (emitted < desired_tokens) {
    std::map<std::pair<int, int>, long> pair_counts;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    if (pair_counts.empty()) break;

    // Highest count wins; ties go to the lexicographically smallest pair.
    const std::pair<int, int>* best = nullptr;
    long best_count = 0;
    for (const auto& [pr, n] : pair_counts) {
      if (!best || n > best_count ||
          (n == best_count && std::tie(pieces[pr.first], pieces[pr.second]) <
                                  std::tie(pieces[best->first], pieces[best->second]))) {
        best = &pr;
        best_count = n;
      }
    }
    const auto [left, right] = *best;
    const std::size_t before = pieces.size();
    const int merged = add_piece(pieces[left] + pieces[right]);
    if (pieces.size() > before) ++emitted;

    for (auto& w : words) {
      std::vector<int> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
  }

  pieces.erase(pieces.begin() + unk_local);
  return WordpieceVocab(std::move(pieces), std::move(marker));
}

std::optional<std::string> vocabulary_size_warning(std::size_t desired_tokens) {
  if (desired_tokens >= 8000 && desired_tokens <= 32000) return std::nullopt;
  return "vocabulary size " + std::to_string(desired_tokens) + " is outside the recommended 8k-32k range";
}

// ---------------------------------------------------------------------------

void MixedVocabConfig::validate() const {
  const std::string* prefixes[] = {&begin_prefix, &middle_prefix, &end_prefix};
  for (const auto* p : prefixes)
    if (p->empty()) throw ConfigError("mixed vocabulary: empty prefix");
  if (begin_prefix == middle_prefix || begin_prefix == end_prefix || middle_prefix == end_prefix)
    throw ConfigError("mixed vocabulary: prefixes must be distinct");
  for (const auto& [w, id] : word_vocab)
    for (const auto* p : prefixes)
      if (w.compare(0, p->size(), *p) == 0)
        throw ConfigError("mixed vocabulary: word '" + w + "' collides with prefix " + *p);
}

std::vector<std::string> encode_mixed(std::string_view sentence, const MixedVocabConfig& config) {
  std::vector<std::string> out;
  for (const auto& w : utf8::split_words(sentence)) {
    if (config.word_vocab.count(w)) {
      out.push_back(w);
      continue;
    }
    const auto cps = utf8::decode(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const std::string& prefix = i == 0                 ? config.begin_prefix
                                  : i + 1 == cps.size() ? config.end_prefix
                                                        : config.middle_prefix;
      out.push_back(prefix + utf8::encode(cps[i]));
    }
  }
  return out;
}

std::string decode_mixed(std::span<const std::string> tokens, const MixedVocabConfig& config) {
  std::vector<std::string> words;
  bool open = false;  // inside a character-expanded word that may continue
  auto starts = [](const std::string& t, const std::string& p) { return t.compare(0, p.size(), p) == 0; };
  for (const auto& t : tokens) {
    if (starts(t, config.begin_prefix)) {
      words.push_back(t.substr(config.begin_prefix.size()));
      open = true;
    } else if (starts(t, config.middle_prefix)) {
      if (!open) throw DecodeError("decode_mixed: " + config.middle_prefix + " without " + config.begin_prefix);
      words.back() += t.substr(config.middle_prefix.size());
    } else if (starts(t, config.end_prefix)) {
      if (!open) throw DecodeError("decode_mixed: " + config.end_prefix + " without " + config.begin_prefix);
      words.back() += t.substr(config.end_prefix.size());
      open = false;
    } else {
      words.push_back(t);
      open = false;
    }
  }
  return utf8::join_words(words);
}

// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::string, TokenId> top_k_words(const std::vector<std::string>& corpus, std::size_t k) {
  std::map<std::string, long> counts;
  for (const auto& s : corpus)
    for (const auto& w : utf8::split_words(s)) ++counts[w];
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);
  std::unordered_map<std::string, TokenId> vocab;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    vocab.emplace(ranked[i].first, static_cast<TokenId>(kNumReserved + i));
  return vocab;
}

}  // namespace

WordVocabConfig WordVocabConfig::from_corpus(const std::vector<std::string>& source,
                                             const std::vector<std::string>& target, std::size_t k_source,
                                             std::size_t k_target) {
  WordVocabConfig cfg;
  cfg.source_vocab = top_k_words(source, k_source);
  cfg.target_vocab = top_k_words(target, k_target);
  return cfg;
}

std::string unk_symbol(std::string_view word, const WordVocabConfig& config) {
  const auto cps = utf8::decode(word);
  if (cps.empty()) throw UsageError("unk_symbol: empty word");
  return utf8::encode(cps.front()) + config.unk_infix + utf8::encode(cps.back());
}

bool is_unk_symbol(std::string_view token, const WordVocabConfig& config) {
  const auto cps = utf8::decode(token);
  const auto infix = utf8::decode(config.unk_infix);
  return cps.size() == infix.size() + 2 && cps.substr(1, infix.size()) == infix;
}

std::vector<std::string> encode_word_unk(std::string_view sentence, const WordVocabConfig& config, Side side) {
  const auto& vocab = side == Side::kSource ? config.source_vocab : config.target_vocab;
  std::vector<std::string> out;
  for (const auto& w : utf8::split_words(sentence)) out.push_back(vocab.count(w) ? w : unk_symbol(w, config));
  return out;
}

}  // namespace gnmt
