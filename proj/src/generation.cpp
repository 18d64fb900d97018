// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/generation.hpp"

#include <stdexcept>

namespace detox {

TokenSequence generate(const LanguageModel& model, std::span<const TokenId> prefix, const GenerationConfig& config) {
  if (config.max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
  config.selection.validate();

  Rng rng(config.seed);
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  history.reserve(prefix.size() + static_cast<std::size_t>(config.max_new_tokens));

  TokenSequence continuation;
  continuation.role = SequenceRole::kContinuation;
  continuation.ids.reserve(static_cast<std::size_t>(config.max_new_tokens));
  for (int step = 0; step < config.max_new_tokens; ++step) {
    const TokenId next = select_token(model.next_token_distribution(history), config.selection, rng);
    if (config.stop_token && next == *config.stop_token) break;
    history.push_back(next);
    continuation.ids.push_back(next);
  }
  return continuation;
}

}  // namespace detox
