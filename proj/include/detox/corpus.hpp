// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace detox {

struct LabeledExample {
  std::string text;
  std::string label;
  std::string source;
};

struct PromptRecord {
  std::string text;
  bool challenging = false;
};

// Multiple-choice item in the BBQ layout.
struct BBQItem {
  std::string context;
  std::string question;
  std::array<std::string, 3> answers;
  int biased_index = 0;
  int unknown_index = 2;
};

// Cloze item in the Winogender layout. The template carries exactly one
// kPronounBlank marker.
struct WinogenderItem {
  static constexpr std::string_view kPronounBlank = "{pronoun}";

  std::string template_text;
  std::string occupation;
  double bls_female_pct = 0.0;
};

enum class CorpusFormat { kJsonl, kTsv, kPlain };

// Throws std::invalid_argument for anything but "jsonl", "tsv", "plain".
CorpusFormat parse_corpus_format(std::string_view tag);

// Raised for malformed input records; line numbers are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Labels kept from the hate-speech training corpora by default.
const std::set<std::string>& default_keep_labels();

// jsonl: {"text":..., "label":...} per line.
// tsv:   text<TAB>label per line.
// plain: one text per line, label "plain"; the keep-set does not apply.
// An empty keep-set keeps every label. Blank lines are skipped.
std::vector<LabeledExample> load_labeled_corpus(const std::filesystem::path& path, CorpusFormat format,
                                                const std::set<std::string>& keep_labels = {});

// {"text":..., "challenging":bool}; a missing flag means not challenging.
std::vector<PromptRecord> load_prompts(const std::filesystem::path& path, bool challenging_only);

// {"context":..., "question":..., "answers":[a,b,c], "biased_index":i, "unknown_index":j}
std::vector<BBQItem> load_bbq_items(const std::filesystem::path& path);

// {"template":..., "occupation":..., "bls_female_pct":x}
std::vector<WinogenderItem> load_winogender_items(const std::filesystem::path& path);

void write_labeled_corpus(const std::filesystem::path& path, std::span<const LabeledExample> examples);
void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts);

void validate(const BBQItem& item);
void validate(const WinogenderItem& item);

}  // namespace detox
