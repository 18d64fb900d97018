// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "detox/distribution.hpp"
#include "detox/sampling.hpp"

namespace detox {

enum class DecayFamily { kExponential, kLinear, kInversePower, kLogistic };

// Accepts "exp"/"exponential", "linear", "invpow"/"inverse_power", "logistic".
DecayFamily parse_decay_family(std::string_view name);
std::string_view decay_family_name(DecayFamily family);

struct DecayConfig {
  DecayFamily family = DecayFamily::kExponential;
  double lambda = 50.0;
  double tau = 0.05;

  // lambda > 0, 0 <= tau < 1.
  void validate() const;
};

enum class Normalization { kSoftmax, kRenormalize };

// Accepts "softmax" and "renorm"/"renormalize".
Normalization parse_normalization(std::string_view name);
std::string_view normalization_name(Normalization mode);

struct ReconstructionConfig {
  DecayConfig decay;
  double expert_top_fraction = 0.30;
  double base_top_fraction = 0.50;
  Normalization normalization = Normalization::kRenormalize;
  SelectionStrategy selection;

  void validate() const;
};

struct ReconstructionTrace {
  std::vector<double> delta;
  std::vector<TokenId> candidate_set;  // ascending
  std::vector<double> alpha;
  NextTokenDistribution output;
  bool fallback_used = false;
};

// expert - base, element-wise.
std::vector<double> delta(const NextTokenDistribution& expert, const NextTokenDistribution& base);

// Attenuation applied to a token whose expert-minus-base gap is x.
//   exponential:   1 if x < -tau, else exp(-lambda x)
//   linear:        1 if x < -tau, else max(1e-6, 1 - (lambda / 100) (x + tau))
//   inverse_power: 1 if x < -tau, else (1 + x + tau)^(-lambda / 10)
//   logistic:      1 / (1 + exp(lambda (x - tau)))
// The exponential branch exceeds 1 on [-tau, 0).
double decay(double x, const DecayConfig& config);

// ceil(fraction * vocab_size), guarded against round-up from representation
// error (0.3 * 10 is 3, not 4).
std::size_t exposed_count(double fraction, std::size_t vocab_size);

// Expert top fraction intersected with base top fraction, ascending ids.
std::vector<TokenId> candidate_intersection(const NextTokenDistribution& expert, const NextTokenDistribution& base,
                                            const ReconstructionConfig& config);

// Scales the base distribution by decay(delta) on the candidate set and
// normalizes over the full vocabulary. An empty candidate set returns base.
ReconstructionTrace reconstruct(const NextTokenDistribution& expert, const NextTokenDistribution& base,
                                const ReconstructionConfig& config);

// Same output as reconstruct(...).output for the dense forms of the inputs,
// in O(entries) plus one dense fill. Sets *fallback_used when non-null.
NextTokenDistribution reconstruct_sparse(const SparseDistribution& expert, const SparseDistribution& base,
                                         const ReconstructionConfig& config, bool* fallback_used = nullptr);

// Queries both models on the same prefix, reconstructs, then selects.
std::pair<TokenId, ReconstructionTrace> debias_step(const LanguageModel& expert, const LanguageModel& base,
                                                    std::span<const TokenId> prefix,
                                                    const ReconstructionConfig& config, Rng& rng);

// A LanguageModel whose distribution is the reconstructed base distribution,
// so generate() runs the debiased pipeline unchanged. The observer, when set,
// sees every step's trace. Not safe to share across threads while observed.
class ExpertGuidedDecoder final : public LanguageModel {
 public:
  using Observer = std::function<void(const ReconstructionTrace&)>;

  // Throws std::invalid_argument when vocabulary sizes differ.
  ExpertGuidedDecoder(const LanguageModel& expert, const LanguageModel& base, ReconstructionConfig config);

  std::size_t vocab_size() const override { return base_.vocab_size(); }
  NextTokenDistribution next_token_distribution(std::span<const TokenId> prefix) const override;

  void set_observer(Observer observer) { observer_ = std::move(observer); }
  const ReconstructionConfig& config() const { return config_; }

 private:
  const LanguageModel& expert_;
  const LanguageModel& base_;
  ReconstructionConfig config_;
  Observer observer_;
};

// {"fallback":bool, "candidates":[[id, delta, alpha], ...]} plus "chosen"
// when chosen >= 0.
nlohmann::json trace_to_json(const ReconstructionTrace& trace, TokenId chosen = -1);
nlohmann::json config_to_json(const ReconstructionConfig& config);

}  // namespace detox
