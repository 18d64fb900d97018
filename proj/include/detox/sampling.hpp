// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detox/distribution.hpp"

namespace detox {

using Rng = std::mt19937_64;

enum class SelectionKind { kGreedy, kTopK, kTopP };

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::kGreedy;
  int k = 20;
  double p = 0.8;

  static SelectionStrategy greedy() { return {}; }
  static SelectionStrategy top_k(int k) { return {SelectionKind::kTopK, k, 1.0}; }
  static SelectionStrategy top_p(double p) { return {SelectionKind::kTopP, 0, p}; }

  // k >= 1 for top-k, 0 < p <= 1 for top-p.
  void validate() const;
  std::string describe() const;
};

SelectionKind parse_selection_kind(std::string_view name);
std::string_view selection_kind_name(SelectionKind kind);

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// SplitMix64 of (master, stream); used for per-prompt seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Lowest id among the maxima.
TokenId argmax(std::span<const double> probs);

// The `count` best ids by descending probability, ties by ascending id.
// Output order is unspecified.
std::vector<TokenId> top_ids(std::span<const double> probs, std::size_t count);

// Same set, sorted best first.
std::vector<TokenId> ranked_top_ids(std::span<const double> probs, std::size_t count);

TokenId select_token(const NextTokenDistribution& dist, const SelectionStrategy& strategy, Rng& rng);

}  // namespace detox
