// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "detox/corpus.hpp"
#include "detox/ngram.hpp"
#include "detox/scoring.hpp"
#include "detox/vocab.hpp"

namespace detox {

// Template-generated desk-scale corpora. Toxic documents embed lexicon terms
// from default_lexicons() in slots that mirror general sentence frames, so
// the two corpora share contexts and differ in what fills them.
struct DeskCorpusConfig {
  std::uint64_t seed = 20240521;
  std::size_t general_documents = 3000;
  std::size_t toxic_documents = 1200;
  std::size_t reference_documents = 1500;
  std::size_t challenging_prompts = 240;
  std::size_t ordinary_prompts = 60;
  // Share of sentences in a toxic document drawn from toxic frames.
  double toxic_sentence_share = 0.75;
  // Share of documents in the reference split that are toxic.
  double reference_toxic_share = 0.25;
};

struct DeskCorpus {
  std::vector<LabeledExample> toxic;      // expert training data
  std::vector<LabeledExample> general;    // base = general + toxic
  std::vector<LabeledExample> reference;  // held-out split for perplexity
  std::vector<PromptRecord> prompts;
};

DeskCorpus make_desk_corpus(const DeskCorpusConfig& config = {});

// ~20 terms per attribute, matching the synthetic corpus vocabulary.
std::vector<AttributeLexicon> default_lexicons();

struct DeskModels {
  Vocabulary vocab;
  NGramModel base;
  NGramModel expert;
  NGramModel reference;
};

// Vocabulary over every split; base on general + toxic; expert on toxic,
// interpolated toward base by config.mix_beta; reference on the held-out
// split.
DeskModels build_desk_models(const DeskCorpus& corpus, const TrainingConfig& config = {});

// toxic.jsonl, general.jsonl, reference.jsonl, prompts.jsonl, lexicons.json
void write_desk_corpus(const DeskCorpus& corpus, const std::filesystem::path& directory);

}  // namespace detox
