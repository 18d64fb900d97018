// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace detox {

namespace {

// Strict order: higher probability first, then lower id.
struct RankOrder {
  std::span<const double> probs;
  bool operator()(TokenId a, TokenId b) const {
    const double pa = probs[static_cast<std::size_t>(a)];
    const double pb = probs[static_cast<std::size_t>(b)];
    return pa != pb ? pa > pb : a < b;
  }
};

std::vector<TokenId> all_ids(std::size_t n) {
  std::vector<TokenId> ids(n);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  return ids;
}

// Draws from ids in the given order, weighted by probs, total mass `mass`.
TokenId draw(std::span<const TokenId> ids, std::span<const double> probs, double mass, Rng& rng) {
  const double target = uniform_unit(rng) * mass;
  double cumulative = 0.0;
  for (TokenId id : ids) {
    cumulative += probs[static_cast<std::size_t>(id)];
    if (target < cumulative) return id;
  }
  // Rounding can leave target at the very top of the mass; take the last
  // candidate with nonzero weight.
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    if (probs[static_cast<std::size_t>(*it)] > 0.0) return *it;
  }
  return ids.front();
}

}  // namespace

void SelectionStrategy::validate() const {
  if (kind == SelectionKind::kTopK && k < 1) throw std::invalid_argument("top-k needs k >= 1");
  if (kind == SelectionKind::kTopP && !(p > 0.0 && p <= 1.0)) throw std::invalid_argument("top-p needs 0 < p <= 1");
}

std::string SelectionStrategy::describe() const {
  switch (kind) {
    case SelectionKind::kGreedy:
      return "greedy";
    case SelectionKind::kTopK:
      return "top_k(k=" + std::to_string(k) + ")";
    case SelectionKind::kTopP: {
      auto s = std::to_string(p);
      s.erase(s.find_last_not_of('0') + 1);
      if (s.back() == '.') s.pop_back();
      return "top_p(p=" + s + ")";
    }
  }
  return "unknown";
}

SelectionKind parse_selection_kind(std::string_view name) {
  if (name == "greedy") return SelectionKind::kGreedy;
  if (name == "top_k" || name == "topk") return SelectionKind::kTopK;
  if (name == "top_p" || name == "topp" || name == "nucleus") return SelectionKind::kTopP;
  throw std::invalid_argument("unknown selection strategy: " + std::string(name));
}

std::string_view selection_kind_name(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::kGreedy:
      return "greedy";
    case SelectionKind::kTopK:
      return "top_k";
    case SelectionKind::kTopP:
      return "top_p";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TokenId argmax(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

std::vector<TokenId> top_ids(std::span<const double> probs, std::size_t count) {
  auto ids = all_ids(probs.size());
  count = std::min(count, ids.size());
  if (count < ids.size()) {
    std::nth_element(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count), ids.end(), RankOrder{probs});
    ids.resize(count);
  }
  return ids;
}

std::vector<TokenId> ranked_top_ids(std::span<const double> probs, std::size_t count) {
  auto ids = all_ids(probs.size());
  count = std::min(count, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count), ids.end(), RankOrder{probs});
  ids.resize(count);
  return ids;
}

TokenId select_token(const NextTokenDistribution& dist, const SelectionStrategy& strategy, Rng& rng) {
  strategy.validate();
  const std::span<const double> probs = dist.probs;
  switch (strategy.kind) {
    case SelectionKind::kGreedy:
      return argmax(probs);
    case SelectionKind::kTopK: {
      auto ids = ranked_top_ids(probs, static_cast<std::size_t>(strategy.k));
      double mass = 0.0;
      for (TokenId id : ids) mass += probs[static_cast<std::size_t>(id)];
      return draw(ids, probs, mass, rng);
    }
    case SelectionKind::kTopP: {
      auto ids = ranked_top_ids(probs, probs.size());
      double mass = 0.0;
      std::size_t keep = 0;
      while (keep < ids.size()) {
        mass += probs[static_cast<std::size_t>(ids[keep])];
        ++keep;
        if (mass >= strategy.p) break;
      }
      return draw(std::span<const TokenId>(ids).first(keep), probs, mass, rng);
    }
  }
  throw std::logic_error("unhandled selection strategy");
}

}  // namespace detox
