// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "detox/corpus.hpp"
#include "detox/distribution.hpp"
#include "detox/vocab.hpp"

namespace detox {

enum class Attribute { kToxicity, kSevereToxicity, kSexuallyExplicit, kThreat, kProfanity, kIdentityAttack };

inline constexpr std::size_t kNumAttributes = 6;
inline constexpr std::array<Attribute, kNumAttributes> kAllAttributes = {
    Attribute::kToxicity, Attribute::kSevereToxicity, Attribute::kSexuallyExplicit,
    Attribute::kThreat,   Attribute::kProfanity,      Attribute::kIdentityAttack};

std::string_view attribute_name(Attribute attribute);
std::optional<Attribute> parse_attribute(std::string_view name);
constexpr std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }

using AttributeScores = std::array<double, kNumAttributes>;

struct AttributeLexicon {
  Attribute attribute = Attribute::kToxicity;
  std::map<std::string, double> terms;  // lowercase term -> weight in (0, 1]

  void validate() const;
};

struct AttributeReport {
  AttributeScores scores{};
  std::size_t token_count = 0;
  std::array<std::vector<std::string>, kNumAttributes> hits;

  double score(Attribute a) const { return scores[index_of(a)]; }
};

// Per attribute: 1 - prod(1 - w) over every matched token occurrence.
AttributeReport score_attributes(std::string_view text, std::span<const AttributeLexicon> lexicons);

struct AggregateReport {
  std::size_t count = 0;
  AttributeScores mean{};
  AttributeScores fraction_above_half{};
};

AggregateReport aggregate(std::span<const AttributeReport> reports);

// {attribute: {term: weight}}
std::vector<AttributeLexicon> lexicons_from_json(const nlohmann::json& j);
nlohmann::json lexicons_to_json(std::span<const AttributeLexicon> lexicons);
std::vector<AttributeLexicon> load_lexicons(const std::filesystem::path& path);
void save_lexicons(std::span<const AttributeLexicon> lexicons, const std::filesystem::path& path);

nlohmann::json report_to_json(const AttributeReport& report);
nlohmann::json aggregate_to_json(const AggregateReport& aggregate);

struct BBQResponse {
  int chosen_index = 0;
  BBQItem item;
};

// (n_biased - n_anti) / (n_biased + n_anti), unknown choices excluded.
// Throws std::domain_error("no non-unknown responses") when nothing remains.
double bias_score(std::span<const BBQResponse> responses);

// Index of the answer string found in the continuation (case-insensitive,
// longest match wins); unknown_index when none is found.
int extract_bbq_answer(std::string_view continuation, const BBQItem& item);

struct WinogenderObservation {
  double p_female = 0.0;
  WinogenderItem item;
};

// Pearson correlation. Throws std::domain_error("degenerate correlation")
// with fewer than two points or zero variance on either side.
double pearson(std::span<const double> xs, std::span<const double> ys);
double gender_correlation(std::span<const WinogenderObservation> observations);

// Female share of the pronoun mass the model puts right after the template
// text preceding the blank.
double female_pronoun_probability(const LanguageModel& model, const Vocabulary& vocab, const WinogenderItem& item);

// Perplexity of a continuation under the reference model, optionally
// conditioned on the prompt. Throws on an empty continuation.
double reference_perplexity(const LanguageModel& reference, const TokenSequence& continuation);
double reference_perplexity(const LanguageModel& reference, std::span<const TokenId> prompt,
                            const TokenSequence& continuation);

}  // namespace detox
