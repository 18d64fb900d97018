// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "detox/corpus.hpp"

namespace detox {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

Vocabulary::Vocabulary() {
  add(std::string(kUnkToken));
  add(std::string(kBosToken));
  add(std::string(kEosToken));
}

Vocabulary::Vocabulary(const std::vector<std::string>& regular_tokens) : Vocabulary() {
  for (const auto& token : regular_tokens) add(token);
}

Vocabulary Vocabulary::from_full_list(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[0] != kUnkToken || tokens[1] != kBosToken || tokens[2] != kEosToken) {
    throw std::invalid_argument("vocabulary must start with <unk>, <s>, </s>");
  }
  return Vocabulary(std::vector<std::string>(tokens.begin() + 3, tokens.end()));
}

void Vocabulary::add(std::string token) {
  if (token.empty()) throw std::invalid_argument("empty token in vocabulary");
  auto id = static_cast<TokenId>(tokens_.size());
  if (!index_.emplace(token, id).second) {
    throw std::invalid_argument("duplicate token in vocabulary: " + token);
  }
  tokens_.push_back(std::move(token));
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::lookup(std::string_view token) const { return find(token).value_or(unk_id()); }

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i > 0) mix('\n');
    for (unsigned char c : tokens_[i]) mix(c);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, SequenceRole role) {
  TokenSequence seq;
  seq.role = role;
  for (const auto& token : split_tokens(text)) seq.ids.push_back(vocab.lookup(token));
  return seq;
}

std::vector<TokenSequence> tokenize_all(std::span<const LabeledExample> corpus, const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  out.reserve(corpus.size());
  for (const auto& example : corpus) out.push_back(tokenize(example.text, vocab));
  return out;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == vocab.bos_id() || id == vocab.eos_id()) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const LabeledExample> corpus, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("empty corpus");

  std::map<std::string, long> counts;
  for (const auto& example : corpus) {
    for (auto& token : split_tokens(example.text)) ++counts[std::move(token)];
  }

  std::vector<std::pair<std::string, long>> kept;
  for (auto& [token, count] : counts) {
    if (count < min_count) continue;
    if (token == Vocabulary::kUnkToken || token == Vocabulary::kBosToken || token == Vocabulary::kEosToken) continue;
    kept.emplace_back(token, count);
  }
  // counts is already lexicographic, so a stable sort on count keeps the tie order.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, count] : kept) tokens.push_back(std::move(token));
  return Vocabulary(tokens);
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "detox-vocab";
  j["version"] = 1;
  j["hash"] = vocab.hash();
  j["tokens"] = vocab.tokens();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "detox-vocab") throw std::runtime_error(path.string() + ": not a vocabulary file");
  auto vocab = Vocabulary::from_full_list(j.at("tokens").get<std::vector<std::string>>());
  if (j.contains("hash") && j["hash"].get<std::string>() != vocab.hash()) {
    throw std::runtime_error(path.string() + ": vocabulary hash mismatch");
  }
  return vocab;
}

}  // namespace detox
