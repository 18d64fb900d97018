// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "detox/distribution.hpp"
#include "detox/sampling.hpp"
#include "detox/vocab.hpp"

namespace detox {

struct GenerationConfig {
  int max_new_tokens = 24;
  SelectionStrategy selection;
  std::uint64_t seed = 0;
  // Generation ends early (without emitting it) when this token is selected.
  std::optional<TokenId> stop_token;
};

// Autoregressive loop: one next_token_distribution() + select_token() per
// step. Returns the continuation only.
TokenSequence generate(const LanguageModel& model, std::span<const TokenId> prefix, const GenerationConfig& config);

}  // namespace detox
