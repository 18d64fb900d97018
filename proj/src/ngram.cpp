// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/ngram.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace detox {

void TrainingConfig::validate() const {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(smoothing_k > 0.0)) throw std::invalid_argument("smoothing_k must be > 0");
  if (!(mix_beta >= 0.0 && mix_beta <= 1.0)) throw std::invalid_argument("mix_beta must lie in [0, 1]");
  if (epochs < 0 || batch_size < 0) throw std::invalid_argument("epochs and batch_size must be non-negative");
}

std::size_t NGramModel::ContextHash::operator()(std::span<const TokenId> ctx) const {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (TokenId id : ctx) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(id)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

NGramModel::NGramModel(int order, double smoothing_k, std::size_t vocab_size, TokenId bos_id)
    : order_(order), smoothing_k_(smoothing_k), vocab_size_(vocab_size), bos_id_(bos_id) {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(smoothing_k > 0.0)) throw std::invalid_argument("smoothing_k must be > 0");
  if (vocab_size == 0) throw std::invalid_argument("empty vocabulary");
  if (bos_id < 0 || static_cast<std::size_t>(bos_id) >= vocab_size) throw std::invalid_argument("bos_id out of range");
}

void NGramModel::check_context(std::span<const TokenId> context) const {
  if (context.size() != static_cast<std::size_t>(order_ - 1)) {
    throw std::invalid_argument("context length " + std::to_string(context.size()) + " does not match order " +
                                std::to_string(order_));
  }
}

std::span<const TokenId> NGramModel::context_of(std::span<const TokenId> prefix, std::vector<TokenId>& buffer) const {
  const auto width = static_cast<std::size_t>(order_ - 1);
  if (prefix.size() >= width) return prefix.subspan(prefix.size() - width);
  buffer.assign(width - prefix.size(), bos_id_);
  buffer.insert(buffer.end(), prefix.begin(), prefix.end());
  return buffer;
}

const NGramModel::ContextCounts* NGramModel::find_context(std::span<const TokenId> context) const {
  auto it = table_.find(context);
  return it == table_.end() ? nullptr : &it->second;
}

NextTokenDistribution NGramModel::next_token_distribution(std::span<const TokenId> prefix) const {
  std::vector<TokenId> buffer;
  const auto* counts = find_context(context_of(prefix, buffer));
  const double k = smoothing_k_;
  const double total = counts ? counts->total : 0.0;
  const double denom = total + k * static_cast<double>(vocab_size_);

  NextTokenDistribution dist(std::vector<double>(vocab_size_, k / denom));
  if (counts) {
    for (const auto& e : counts->entries) dist.probs[static_cast<std::size_t>(e.token)] = (e.count + k) / denom;
  }
  return dist;
}

std::optional<SparseDistribution> NGramModel::sparse_distribution(std::span<const TokenId> prefix) const {
  std::vector<TokenId> buffer;
  const auto* counts = find_context(context_of(prefix, buffer));
  const double k = smoothing_k_;
  const double denom = (counts ? counts->total : 0.0) + k * static_cast<double>(vocab_size_);
  SparseDistribution dist;
  dist.vocab_size = vocab_size_;
  dist.floor = k / denom;
  if (counts) {
    dist.entries.reserve(counts->entries.size());
    for (const auto& e : counts->entries) dist.entries.emplace_back(e.token, (e.count + k) / denom);
  }
  return dist;
}

double NGramModel::token_probability(std::span<const TokenId> prefix, TokenId token) const {
  std::vector<TokenId> buffer;
  auto context = context_of(prefix, buffer);
  const double k = smoothing_k_;
  return (count(context, token) + k) / (context_total(context) + k * static_cast<double>(vocab_size_));
}

double NGramModel::count(std::span<const TokenId> context, TokenId token) const {
  check_context(context);
  const auto* counts = find_context(context);
  if (!counts) return 0.0;
  auto it = std::lower_bound(counts->entries.begin(), counts->entries.end(), token,
                             [](const Entry& e, TokenId t) { return e.token < t; });
  return (it != counts->entries.end() && it->token == token) ? it->count : 0.0;
}

double NGramModel::context_total(std::span<const TokenId> context) const {
  check_context(context);
  const auto* counts = find_context(context);
  return counts ? counts->total : 0.0;
}

void NGramModel::add_count(std::span<const TokenId> context, TokenId token, double amount) {
  check_context(context);
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size_) throw std::out_of_range("token id out of range");
  if (!(amount >= 0.0)) throw std::invalid_argument("counts must be non-negative");
  for (TokenId id : context) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) throw std::out_of_range("context id out of range");
  }
  auto it = table_.find(context);
  if (it == table_.end()) it = table_.emplace(std::vector<TokenId>(context.begin(), context.end()), ContextCounts{}).first;
  auto& entries = it->second.entries;
  auto pos = std::lower_bound(entries.begin(), entries.end(), token, [](const Entry& e, TokenId t) { return e.token < t; });
  if (pos != entries.end() && pos->token == token) {
    pos->count += amount;
  } else {
    entries.insert(pos, Entry{token, amount});
  }
  it->second.total += amount;
}

void NGramModel::for_each_context(
    const std::function<void(std::span<const TokenId>, const ContextCounts&)>& visit) const {
  std::vector<const std::vector<TokenId>*> keys;
  keys.reserve(table_.size());
  for (const auto& [key, counts] : table_) keys.push_back(&key);
  std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (const auto* key : keys) visit(*key, table_.at(*key));
}

NGramModel train_ngram(std::span<const TokenSequence> corpus, const TrainingConfig& config, const Vocabulary& vocab,
                       const NGramModel* base) {
  config.validate();
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (base && (base->vocab_size() != vocab.size() || base->order() != config.order)) {
    throw std::invalid_argument("vocabulary mismatch with base model");
  }
  if (base && !base->metadata().vocab_hash.empty() && base->metadata().vocab_hash != vocab.hash()) {
    throw std::invalid_argument("vocabulary mismatch with base model");
  }

  NGramModel raw(config.order, config.smoothing_k, vocab.size(), vocab.bos_id());
  const auto width = static_cast<std::size_t>(config.order - 1);
  std::vector<TokenId> padded;
  for (const auto& seq : corpus) {
    padded.assign(width, vocab.bos_id());
    padded.insert(padded.end(), seq.ids.begin(), seq.ids.end());
    padded.push_back(vocab.eos_id());
    for (std::size_t i = width; i < padded.size(); ++i) {
      raw.add_count(std::span<const TokenId>(padded).subspan(i - width, width), padded[i], 1.0);
    }
  }

  auto stamp = [&](NGramModel& model) {
    model.metadata().vocab_hash = vocab.hash();
    model.metadata().has_base = base != nullptr;
    model.metadata().mix_beta = base ? config.mix_beta : 0.0;
    model.metadata().epochs = config.epochs;
    model.metadata().batch_size = config.batch_size;
    model.metadata().training_sequences = corpus.size();
  };
  if (!base) {
    stamp(raw);
    return raw;
  }

  const double beta = config.mix_beta;
  NGramModel mixed(config.order, config.smoothing_k, vocab.size(), vocab.bos_id());
  // Union of contexts from both sides, mixing normalized count vectors.
  std::map<std::vector<TokenId>, bool> contexts;
  raw.for_each_context([&](std::span<const TokenId> ctx, const auto&) { contexts[{ctx.begin(), ctx.end()}] = true; });
  base->for_each_context([&](std::span<const TokenId> ctx, const auto&) { contexts[{ctx.begin(), ctx.end()}] = true; });

  for (const auto& [ctx, unused] : contexts) {
    const auto* own = raw.find_context(ctx);
    const auto* other = base->find_context(ctx);
    const double own_total = own ? own->total : 0.0;
    const double other_total = other ? other->total : 0.0;
    double own_weight = own_total > 0.0 ? 1.0 - beta : 0.0;
    double other_weight = other_total > 0.0 ? beta : 0.0;
    const double mass = own_weight * own_total + other_weight * other_total;
    const double weight_sum = own_weight + other_weight;
    if (!(mass > 0.0) || !(weight_sum > 0.0)) continue;
    own_weight /= weight_sum;
    other_weight /= weight_sum;

    std::map<TokenId, double> mixture;
    if (own_weight > 0.0) {
      for (const auto& e : own->entries) mixture[e.token] += own_weight * e.count / own_total;
    }
    if (other_weight > 0.0) {
      for (const auto& e : other->entries) mixture[e.token] += other_weight * e.count / other_total;
    }
    for (const auto& [token, share] : mixture) {
      if (share > 0.0) mixed.add_count(ctx, token, mass * share);
    }
  }
  stamp(mixed);
  return mixed;
}

double conditional_nll(const LanguageModel& model, std::span<const TokenId> context,
                       std::span<const TokenId> continuation) {
  if (continuation.empty()) throw std::invalid_argument("nll of an empty sequence");
  std::vector<TokenId> history(context.begin(), context.end());
  history.reserve(context.size() + continuation.size());
  double total = 0.0;
  for (TokenId token : continuation) {
    total -= std::log(model.token_probability(history, token));
    history.push_back(token);
  }
  return total / static_cast<double>(continuation.size());
}

double nll(const LanguageModel& model, const TokenSequence& sequence) { return conditional_nll(model, {}, sequence.ids); }

double perplexity(const LanguageModel& model, const TokenSequence& sequence) { return std::exp(nll(model, sequence)); }

double conditional_perplexity(const LanguageModel& model, std::span<const TokenId> context,
                              std::span<const TokenId> continuation) {
  return std::exp(conditional_nll(model, context, continuation));
}

void save_model(const NGramModel& model, const Vocabulary& vocab, const std::filesystem::path& path) {
  using nlohmann::json;
  if (model.vocab_size() != vocab.size()) throw std::invalid_argument("model does not match vocabulary");
  const auto& meta = model.metadata();
  json j;
  j["format"] = "detox-ngram";
  j["version"] = 1;
  j["order"] = model.order();
  j["smoothing_k"] = model.smoothing_k();
  j["vocab_size"] = model.vocab_size();
  j["vocab_hash"] = vocab.hash();
  j["metadata"] = {{"has_base", meta.has_base},
                   {"mix_beta", meta.mix_beta},
                   {"epochs", meta.epochs},
                   {"batch_size", meta.batch_size},
                   {"training_sequences", meta.training_sequences}};
  json contexts = json::array();
  model.for_each_context([&](std::span<const TokenId> ctx, const NGramModel::ContextCounts& counts) {
    json entries = json::array();
    for (const auto& e : counts.entries) entries.push_back({e.token, e.count});
    contexts.push_back({{"context", std::vector<TokenId>(ctx.begin(), ctx.end())}, {"counts", std::move(entries)}});
  });
  j["contexts"] = std::move(contexts);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

NGramModel load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "detox-ngram") throw std::runtime_error(path.string() + ": not a model file");
  if (j.value("version", 0) != 1) throw std::runtime_error(path.string() + ": unsupported model version");
  if (j.at("vocab_hash").get<std::string>() != vocab.hash() || j.at("vocab_size").get<std::size_t>() != vocab.size()) {
    throw std::runtime_error(path.string() + ": vocabulary mismatch");
  }

  NGramModel model(j.at("order").get<int>(), j.at("smoothing_k").get<double>(), vocab.size(), vocab.bos_id());
  for (const auto& c : j.at("contexts")) {
    auto ctx = c.at("context").get<std::vector<TokenId>>();
    for (const auto& e : c.at("counts")) model.add_count(ctx, e.at(0).get<TokenId>(), e.at(1).get<double>());
  }
  auto& meta = model.metadata();
  const auto& m = j.at("metadata");
  meta.vocab_hash = vocab.hash();
  meta.has_base = m.value("has_base", false);
  meta.mix_beta = m.value("mix_beta", 0.0);
  meta.epochs = m.value("epochs", 0);
  meta.batch_size = m.value("batch_size", 0);
  meta.training_sequences = m.value("training_sequences", std::size_t{0});
  return model;
}

}  // namespace detox
