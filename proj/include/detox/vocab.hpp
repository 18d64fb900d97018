// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace detox {

using TokenId = std::int32_t;

enum class SequenceRole { kPrefix, kContinuation, kFull };

struct TokenSequence {
  std::vector<TokenId> ids;
  SequenceRole role = SequenceRole::kFull;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

struct LabeledExample;

/// Shared token inventory. The three special tokens always occupy ids 0..2,
/// regular tokens follow in the order they were supplied.
class Vocabulary {
 public:
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& regular_tokens);

  // Full token list including specials at positions 0..2, as written by
  // save_vocabulary().
  static Vocabulary from_full_list(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> find(std::string_view token) const;
  // Falls back to unk_id() for unknown tokens.
  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }

  TokenId unk_id() const { return 0; }
  TokenId bos_id() const { return 1; }
  TokenId eos_id() const { return 2; }

  // FNV-1a 64 over the newline-joined token list, as 16 hex digits.
  std::string hash() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> index_;
};

// Lowercases and splits on whitespace; every ASCII punctuation character is
// its own token.
std::vector<std::string> split_tokens(std::string_view text);

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       SequenceRole role = SequenceRole::kFull);
std::vector<TokenSequence> tokenize_all(std::span<const LabeledExample> corpus, const Vocabulary& vocab);

// Space-joined surface form; bos/eos are dropped.
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

// Tokens seen at least min_count times, ordered by descending count with
// lexicographic tie-break. Throws std::invalid_argument on an empty corpus or
// min_count < 1.
Vocabulary build_vocabulary(std::span<const LabeledExample> corpus, int min_count = 1);

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace detox
