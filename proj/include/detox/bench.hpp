// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "detox/corpus.hpp"
#include "detox/distribution.hpp"
#include "detox/reconstruct.hpp"
#include "detox/sampling.hpp"
#include "detox/scoring.hpp"
#include "detox/vocab.hpp"

namespace detox {

struct BenchModels {
  const Vocabulary& vocab;
  const LanguageModel& expert;
  const LanguageModel& base;
  const LanguageModel& reference;
};

struct ReconstructionVariant {
  DecayConfig decay;
  Normalization normalization = Normalization::kRenormalize;

  bool operator==(const ReconstructionVariant& other) const {
    return decay.family == other.decay.family && decay.lambda == other.decay.lambda &&
           decay.tau == other.decay.tau && normalization == other.normalization;
  }
};

struct ExperimentConfig {
  std::vector<PromptRecord> prompts;
  int max_new_tokens = 24;
  std::vector<ReconstructionVariant> grid;
  double expert_top_fraction = 0.30;
  double base_top_fraction = 0.50;
  SelectionStrategy selection;
  std::uint64_t seed = 42;
  int repetitions = 1;
  int jobs = 1;

  void validate() const;
};

struct BenchRow {
  std::string label;
  bool reconstruction = false;
  ReconstructionVariant variant;
  SelectionStrategy selection;
  std::uint64_t seed = 0;
  AggregateReport attributes;
  // 100 * (baseline - value) / baseline; 0 where the baseline is 0.
  AttributeScores reduction_pct{};
  double mean_perplexity = 0.0;
  double latency_ms_per_token = 0.0;
  double fallback_rate = 0.0;
  std::size_t generated_tokens = 0;
  // "lambda", "tau" or both for sweep rows.
  std::vector<std::string> slices;
};

struct BenchReport {
  std::string experiment;
  std::vector<BenchRow> rows;  // rows[0] is the plain-decoding baseline
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::string> warnings;

  const BenchRow& baseline() const { return rows.front(); }
};

// One baseline row plus one row per grid entry (duplicates collapsed).
BenchReport run_generation_bench(const ExperimentConfig& config, const BenchModels& models,
                                 std::span<const AttributeLexicon> lexicons);

// Every decay family at lambda = 100, tau = 0.05.
BenchReport run_decay_comparison(ExperimentConfig config, const BenchModels& models,
                                 std::span<const AttributeLexicon> lexicons);

// Cartesian grid over the given values, exponential decay. Throws
// std::invalid_argument on an empty grid.
BenchReport run_sweep(std::span<const double> lambdas, std::span<const double> taus, ExperimentConfig config,
                      const BenchModels& models, std::span<const AttributeLexicon> lexicons);

struct TradeoffPoint {
  double lambda = 0.0;
  double mean_toxicity = 0.0;
  double mean_perplexity = 0.0;
};

struct TradeoffResult {
  std::vector<TradeoffPoint> points;  // ascending lambda
  double tau = 0.05;
  std::vector<std::string> warnings;
};

TradeoffResult run_tradeoff(std::span<const double> lambdas, ExperimentConfig config, const BenchModels& models,
                            std::span<const AttributeLexicon> lexicons, double tau = 0.05);

struct LatencyStrategy {
  std::string name;
  bool reconstruction = false;
  SelectionStrategy selection;
};

// greedy, top_k (k=20), top_p (p=0.9), expert-guided greedy.
std::vector<LatencyStrategy> default_latency_strategies();

struct LatencyRow {
  std::string strategy;
  double ms_per_token = 0.0;
  double ms_per_continuation = 0.0;
  double relative = 0.0;  // ms_per_token / greedy ms_per_token
  std::size_t continuations = 0;
  std::size_t tokens = 0;
};

// Fixed-length continuations (no early stop), batch size 1, strategies
// interleaved per prompt. The first strategy named "greedy" is the unit.
std::vector<LatencyRow> run_latency(std::span<const LatencyStrategy> strategies, std::size_t n_prompts,
                                    int fixed_length, const ExperimentConfig& config, const BenchModels& models,
                                    const ReconstructionConfig& reconstruction = {});

nlohmann::json report_to_json(const BenchReport& report);
// Same, without wall-clock fields.
nlohmann::json report_to_json_deterministic(const BenchReport& report);

void write_report_json(const BenchReport& report, const std::filesystem::path& path);
void write_report_csv(const BenchReport& report, const std::filesystem::path& path);
void write_tradeoff_csv(const TradeoffResult& result, const std::filesystem::path& path);
void write_latency_csv(std::span<const LatencyRow> rows, const std::filesystem::path& path);

}  // namespace detox
