// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "detox/vocab.hpp"

namespace detox {

// Probability per TokenId over the whole vocabulary.
struct NextTokenDistribution {
  std::vector<double> probs;

  NextTokenDistribution() = default;
  explicit NextTokenDistribution(std::vector<double> p) : probs(std::move(p)) {}

  std::size_t size() const { return probs.size(); }
  double operator[](TokenId id) const { return probs[static_cast<std::size_t>(id)]; }

  static NextTokenDistribution uniform(std::size_t vocab_size);
};

// A distribution where every id not listed in `entries` has probability
// `floor`. Entries are sorted by id.
struct SparseDistribution {
  std::size_t vocab_size = 0;
  double floor = 0.0;
  std::vector<std::pair<TokenId, double>> entries;

  NextTokenDistribution dense() const;
};

// Entries in [0, 1] summing to 1 within tolerance.
bool is_normalized(const NextTokenDistribution& dist, double tolerance = 1e-9);

// Throws std::invalid_argument if the two distributions have different sizes.
void require_same_size(const NextTokenDistribution& a, const NextTokenDistribution& b);

// Anything that yields p(x | prefix) over a fixed vocabulary. Implementations
// pad short prefixes as they see fit; callers pass the raw history.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual NextTokenDistribution next_token_distribution(std::span<const TokenId> prefix) const = 0;

  // Defaults to a full distribution query.
  virtual double token_probability(std::span<const TokenId> prefix, TokenId token) const;

  // Same distribution in floor-plus-entries form, for models that have one.
  virtual std::optional<SparseDistribution> sparse_distribution(std::span<const TokenId> prefix) const;
};

}  // namespace detox
