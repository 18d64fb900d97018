// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>

#include "json.hpp"

namespace detox {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Calls handle(object, line_number) for each non-blank line of a JSONL file.
void for_each_json_line(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& handle) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, "invalid JSON");
    }
    if (!j.is_object()) throw ParseError(path.string(), line_no, "expected a JSON object");
    try {
      handle(j, line_no);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
}

std::string required_text(const json& j, const char* key, const std::string& source, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ParseError(source, line, std::string("missing string field \"") + key + "\"");
  }
  auto text = j[key].get<std::string>();
  if (text.empty()) throw ParseError(source, line, std::string("empty \"") + key + "\"");
  return text;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ": line " + std::to_string(line) + ": " + message), line_(line) {}

CorpusFormat parse_corpus_format(std::string_view tag) {
  if (tag == "jsonl") return CorpusFormat::kJsonl;
  if (tag == "tsv") return CorpusFormat::kTsv;
  if (tag == "plain") return CorpusFormat::kPlain;
  throw std::invalid_argument("unknown corpus format: " + std::string(tag));
}

const std::set<std::string>& default_keep_labels() {
  static const std::set<std::string> labels = {"hate",     "offensive",   "biased",
                                               "directed", "generalized", "sarcastic"};
  return labels;
}

std::vector<LabeledExample> load_labeled_corpus(const std::filesystem::path& path, CorpusFormat format,
                                                const std::set<std::string>& keep_labels) {
  const auto source = path.stem().string();
  const auto name = path.string();
  auto keep = [&](const std::string& label) { return keep_labels.empty() || keep_labels.count(label) > 0; };

  std::vector<LabeledExample> out;
  if (format == CorpusFormat::kJsonl) {
    for_each_json_line(path, [&](const json& j, std::size_t line) {
      LabeledExample ex;
      ex.text = required_text(j, "text", name, line);
      if (!j.contains("label") || !j["label"].is_string()) throw ParseError(name, line, "missing string field \"label\"");
      ex.label = j["label"].get<std::string>();
      ex.source = j.value("source", source);
      if (keep(ex.label)) out.push_back(std::move(ex));
    });
    return out;
  }

  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    if (format == CorpusFormat::kPlain) {
      out.push_back({line, "plain", source});
      continue;
    }
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(name, line_no, "expected text<TAB>label");
    LabeledExample ex{line.substr(0, tab), line.substr(tab + 1), source};
    if (ex.text.empty()) throw ParseError(name, line_no, "empty text");
    if (keep(ex.label)) out.push_back(std::move(ex));
  }
  return out;
}

std::vector<PromptRecord> load_prompts(const std::filesystem::path& path, bool challenging_only) {
  std::vector<PromptRecord> out;
  for_each_json_line(path, [&](const json& j, std::size_t line) {
    PromptRecord record;
    record.text = required_text(j, "text", path.string(), line);
    if (j.contains("challenging")) {
      if (!j["challenging"].is_boolean()) throw ParseError(path.string(), line, "\"challenging\" must be a boolean");
      record.challenging = j["challenging"].get<bool>();
    }
    if (!challenging_only || record.challenging) out.push_back(std::move(record));
  });
  return out;
}

void validate(const BBQItem& item) {
  auto in_range = [](int i) { return i >= 0 && i <= 2; };
  if (!in_range(item.biased_index) || !in_range(item.unknown_index) || item.biased_index == item.unknown_index) {
    throw std::invalid_argument("BBQ indices must be distinct and in {0,1,2}");
  }
}

void validate(const WinogenderItem& item) {
  const auto& t = item.template_text;
  auto first = t.find(WinogenderItem::kPronounBlank);
  if (first == std::string::npos || t.find(WinogenderItem::kPronounBlank, first + 1) != std::string::npos) {
    throw std::invalid_argument("Winogender template needs exactly one " + std::string(WinogenderItem::kPronounBlank));
  }
  if (item.bls_female_pct < 0.0 || item.bls_female_pct > 1.0) {
    throw std::invalid_argument("bls_female_pct must lie in [0, 1]");
  }
}

std::vector<BBQItem> load_bbq_items(const std::filesystem::path& path) {
  std::vector<BBQItem> out;
  for_each_json_line(path, [&](const json& j, std::size_t line) {
    BBQItem item;
    item.context = j.at("context").get<std::string>();
    item.question = j.at("question").get<std::string>();
    auto answers = j.at("answers").get<std::vector<std::string>>();
    if (answers.size() != 3) throw ParseError(path.string(), line, "expected 3 answers");
    std::copy(answers.begin(), answers.end(), item.answers.begin());
    item.biased_index = j.at("biased_index").get<int>();
    item.unknown_index = j.at("unknown_index").get<int>();
    try {
      validate(item);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string(), line, e.what());
    }
    out.push_back(std::move(item));
  });
  return out;
}

std::vector<WinogenderItem> load_winogender_items(const std::filesystem::path& path) {
  std::vector<WinogenderItem> out;
  for_each_json_line(path, [&](const json& j, std::size_t line) {
    WinogenderItem item;
    item.template_text = j.at("template").get<std::string>();
    item.occupation = j.at("occupation").get<std::string>();
    item.bls_female_pct = j.at("bls_female_pct").get<double>();
    try {
      validate(item);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string(), line, e.what());
    }
    out.push_back(std::move(item));
  });
  return out;
}

void write_labeled_corpus(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ex : examples) {
    out << json{{"text", ex.text}, {"label", ex.label}, {"source", ex.source}}.dump() << '\n';
  }
}

void write_prompts(const std::filesystem::path& path, std::span<const PromptRecord> prompts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : prompts) out << json{{"text", p.text}, {"challenging", p.challenging}}.dump() << '\n';
}

}  // namespace detox
