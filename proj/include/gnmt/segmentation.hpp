// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gnmt/common.hpp"

namespace gnmt {

// Reserved ids at the head of every vocabulary file, in file order.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnknownCharId = 3;
inline constexpr std::size_t kNumReserved = 4;

inline constexpr char32_t kUnknownChar = U'�';
inline constexpr std::string_view kPadSymbol = "<pad>";
inline constexpr std::string_view kBosSymbol = "<s>";
inline constexpr std::string_view kEosSymbol = "</s>";

/// Shared source/target subword inventory.
///
/// Word-initial pieces start with the boundary marker. Every character in the
/// basic inventory is present in both its marked and unmarked form, so any
/// word over the inventory can be segmented. Characters outside the
/// inventory (and the marker character itself) are replaced by the unknown
/// character before matching.
class WordpieceVocab {
 public:
  /// `pieces` excludes the four reserved entries. The marked unknown
  /// character is appended if absent.
  explicit WordpieceVocab(std::vector<std::string> pieces, std::string marker = "_");

  static WordpieceVocab load(const std::filesystem::path& path, std::string marker = "_");
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return pieces_.size(); }
  const std::string& marker() const { return marker_; }
  const std::string& piece(TokenId id) const;
  std::optional<TokenId> id(std::string_view piece) const;
  const std::vector<std::string>& pieces() const { return pieces_; }

  /// True when the character can be represented without the unknown fallback.
  bool representable(char32_t c) const;
  std::vector<char32_t> inventory() const;

  TokenSeq segment(std::string_view sentence) const;
  TokenSeq segment(const std::vector<std::string>& words) const;
  std::vector<std::string> segment_pieces(std::string_view sentence) const;

  /// Throws DecodeError for ids outside the vocabulary or reserved control ids.
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  void segment_word(std::u32string_view word, TokenSeq& out) const;

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> index_;
  std::string marker_;
  char32_t marker_char_;
  std::size_t max_piece_chars_ = 1;
};

/// Greedy pair-merge induction over the marker-prefixed corpus.
/// `desired_tokens` counts pieces excluding the reserved entries.
WordpieceVocab train_wordpiece(const std::vector<std::string>& corpus, std::size_t desired_tokens,
                               std::size_t char_cap = 500, std::string marker = "_");

/// Number of pieces the trainer emits before any merge for this corpus.
std::size_t basic_piece_count(const std::vector<std::string>& corpus, std::size_t char_cap,
                              std::string_view marker = "_");

/// Returns a message when the requested size is outside the usual 8k-32k band.
std::optional<std::string> vocabulary_size_warning(std::size_t desired_tokens);

// ---------------------------------------------------------------------------
// Mixed word/character scheme.

struct MixedVocabConfig {
  std::unordered_map<std::string, TokenId> word_vocab;
  std::string begin_prefix = "<B>";
  std::string middle_prefix = "<M>";
  std::string end_prefix = "<E>";

  /// Throws ConfigError if a prefix collides with an in-vocabulary symbol.
  void validate() const;
};

std::vector<std::string> encode_mixed(std::string_view sentence, const MixedVocabConfig& config);
std::string decode_mixed(std::span<const std::string> tokens, const MixedVocabConfig& config);

// ---------------------------------------------------------------------------
// Word model with <first>_UNK_<last> symbols.

struct WordVocabConfig {
  std::unordered_map<std::string, TokenId> source_vocab;
  std::unordered_map<std::string, TokenId> target_vocab;
  std::string unk_infix = "_UNK_";

  /// Keeps the `k_source` / `k_target` most frequent words (ties by byte order).
  static WordVocabConfig from_corpus(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                     std::size_t k_source, std::size_t k_target);
};

enum class Side { kSource, kTarget };

std::string unk_symbol(std::string_view word, const WordVocabConfig& config);
bool is_unk_symbol(std::string_view token, const WordVocabConfig& config);
std::vector<std::string> encode_word_unk(std::string_view sentence, const WordVocabConfig& config,
                                         Side side = Side::kSource);

}  // namespace gnmt
