// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/distribution.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace detox {

NextTokenDistribution NextTokenDistribution::uniform(std::size_t vocab_size) {
  if (vocab_size == 0) throw std::invalid_argument("empty vocabulary");
  return NextTokenDistribution(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)));
}

NextTokenDistribution SparseDistribution::dense() const {
  std::vector<double> probs(vocab_size, floor);
  for (const auto& [id, p] : entries) probs[static_cast<std::size_t>(id)] = p;
  return NextTokenDistribution(std::move(probs));
}

bool is_normalized(const NextTokenDistribution& dist, double tolerance) {
  if (dist.probs.empty()) return false;
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

void require_same_size(const NextTokenDistribution& a, const NextTokenDistribution& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("distribution length mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

double LanguageModel::token_probability(std::span<const TokenId> prefix, TokenId token) const {
  return next_token_distribution(prefix)[token];
}

std::optional<SparseDistribution> LanguageModel::sparse_distribution(std::span<const TokenId>) const {
  return std::nullopt;
}

}  // namespace detox
