// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "detox/distribution.hpp"
#include "detox/vocab.hpp"

namespace detox {

struct TrainingConfig {
  int order = 3;
  double smoothing_k = 0.1;
  // Weight pulled toward the base model's per-context distributions when a
  // base is supplied to train_ngram().
  double mix_beta = 0.3;
  // Recorded in model metadata; count estimation has no notion of either.
  int epochs = 10;
  int batch_size = 8;

  void validate() const;
};

struct ModelMetadata {
  std::string vocab_hash;
  bool has_base = false;
  double mix_beta = 0.0;
  int epochs = 0;
  int batch_size = 0;
  std::size_t training_sequences = 0;
};

// Add-k smoothed n-gram model. Counts are real-valued so that interpolated
// (continued-training) models share the representation.
class NGramModel final : public LanguageModel {
 public:
  struct Entry {
    TokenId token;
    double count;
  };
  struct ContextCounts {
    std::vector<Entry> entries;  // sorted by token
    double total = 0.0;
  };

  NGramModel(int order, double smoothing_k, std::size_t vocab_size, TokenId bos_id);

  int order() const { return order_; }
  double smoothing_k() const { return smoothing_k_; }
  TokenId bos_id() const { return bos_id_; }
  std::size_t vocab_size() const override { return vocab_size_; }

  // prefix is bos-padded on the left and truncated to the last order-1 ids.
  NextTokenDistribution next_token_distribution(std::span<const TokenId> prefix) const override;
  double token_probability(std::span<const TokenId> prefix, TokenId token) const override;
  std::optional<SparseDistribution> sparse_distribution(std::span<const TokenId> prefix) const override;

  // context must hold exactly order-1 ids; throws std::invalid_argument otherwise.
  double count(std::span<const TokenId> context, TokenId token) const;
  double context_total(std::span<const TokenId> context) const;
  void add_count(std::span<const TokenId> context, TokenId token, double amount);

  std::size_t context_count() const { return table_.size(); }
  // Visits contexts in lexicographic order.
  void for_each_context(
      const std::function<void(std::span<const TokenId>, const ContextCounts&)>& visit) const;
  const ContextCounts* find_context(std::span<const TokenId> context) const;

  ModelMetadata& metadata() { return metadata_; }
  const ModelMetadata& metadata() const { return metadata_; }

 private:
  struct ContextHash {
    using is_transparent = void;
    std::size_t operator()(std::span<const TokenId> ctx) const;
    std::size_t operator()(const std::vector<TokenId>& ctx) const { return (*this)(std::span<const TokenId>(ctx)); }
  };
  struct ContextEqual {
    using is_transparent = void;
    template <typename A, typename B>
    bool operator()(const A& a, const B& b) const {
      return std::equal(a.begin(), a.end(), b.begin(), b.end());
    }
  };

  void check_context(std::span<const TokenId> context) const;
  // Writes the last order-1 ids of the bos-padded prefix into buffer.
  std::span<const TokenId> context_of(std::span<const TokenId> prefix, std::vector<TokenId>& buffer) const;

  int order_;
  double smoothing_k_;
  std::size_t vocab_size_;
  TokenId bos_id_;
  std::unordered_map<std::vector<TokenId>, ContextCounts, ContextHash, ContextEqual> table_;
  ModelMetadata metadata_;
};

// Maximum-likelihood counts with bos padding and a trailing eos target per
// sequence. With a base model, each context's count vector becomes
//   M * ((1 - beta) * corpus_normalized + beta * base_normalized)
// with M = (1 - beta) * corpus_total + beta * base_total; a side with no
// mass for the context drops out of the mixture.
NGramModel train_ngram(std::span<const TokenSequence> corpus, const TrainingConfig& config,
                       const Vocabulary& vocab, const NGramModel* base = nullptr);

// Mean negative log-likelihood in nats per token; position i conditions on
// ids [0, i). Throws std::invalid_argument for an empty sequence.
double nll(const LanguageModel& model, const TokenSequence& sequence);
// Same, with every position also conditioned on a preceding context.
double conditional_nll(const LanguageModel& model, std::span<const TokenId> context,
                       std::span<const TokenId> continuation);

double perplexity(const LanguageModel& model, const TokenSequence& sequence);
double conditional_perplexity(const LanguageModel& model, std::span<const TokenId> context,
                              std::span<const TokenId> continuation);

// JSON dump {format, version, order, smoothing_k, vocab_size, vocab_hash,
// metadata, contexts}. Loading checks the hash against vocab.
void save_model(const NGramModel& model, const Vocabulary& vocab, const std::filesystem::path& path);
NGramModel load_model(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace detox
