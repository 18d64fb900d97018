// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/reconstruct.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace detox {

namespace {

constexpr double kLinearFloor = 1e-6;

void check_fraction(double f, const char* name) {
  if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0, 1]");
}

}  // namespace

DecayFamily parse_decay_family(std::string_view name) {
  if (name == "exp" || name == "exponential") return DecayFamily::kExponential;
  if (name == "linear") return DecayFamily::kLinear;
  if (name == "invpow" || name == "inverse_power") return DecayFamily::kInversePower;
  if (name == "logistic") return DecayFamily::kLogistic;
  throw std::invalid_argument("unknown decay family: " + std::string(name));
}

std::string_view decay_family_name(DecayFamily family) {
  switch (family) {
    case DecayFamily::kExponential:
      return "exponential";
    case DecayFamily::kLinear:
      return "linear";
    case DecayFamily::kInversePower:
      return "inverse_power";
    case DecayFamily::kLogistic:
      return "logistic";
  }
  return "unknown";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "softmax") return Normalization::kSoftmax;
  if (name == "renorm" || name == "renormalize") return Normalization::kRenormalize;
  throw std::invalid_argument("unknown normalization: " + std::string(name));
}

std::string_view normalization_name(Normalization mode) {
  return mode == Normalization::kSoftmax ? "softmax" : "renormalize";
}

void DecayConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in [0, 1)");
}

void ReconstructionConfig::validate() const {
  decay.validate();
  check_fraction(expert_top_fraction, "expert_top_fraction");
  check_fraction(base_top_fraction, "base_top_fraction");
  selection.validate();
}

std::vector<double> delta(const NextTokenDistribution& expert, const NextTokenDistribution& base) {
  require_same_size(expert, base);
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = expert.probs[i] - base.probs[i];
  return out;
}

double decay(double x, const DecayConfig& config) {
  const double lambda = config.lambda;
  const double tau = config.tau;
  switch (config.family) {
    case DecayFamily::kExponential:
      return x < -tau ? 1.0 : std::exp(-lambda * x);
    case DecayFamily::kLinear:
      return x < -tau ? 1.0 : std::max(kLinearFloor, 1.0 - (lambda / 100.0) * (x + tau));
    case DecayFamily::kInversePower:
      return x < -tau ? 1.0 : std::pow(1.0 + x + tau, -lambda / 10.0);
    case DecayFamily::kLogistic:
      return 1.0 / (1.0 + std::exp(lambda * (x - tau)));
  }
  throw std::logic_error("unhandled decay family");
}

std::size_t exposed_count(double fraction, std::size_t vocab_size) {
  const double raw = fraction * static_cast<double>(vocab_size);
  auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(count, 1, vocab_size);
}

namespace {

// The `count` best ids (probability descending, ties by ascending id) are
// those above `threshold` plus the first `ties` ids equal to it.
struct TopCut {
  double threshold = -1.0;
  std::size_t ties = 0;
};

TopCut top_cut(std::span<const double> probs, std::size_t count) {
  const std::size_t n = probs.size();
  if (count >= n) return {};
  // One pass for the minimum and its multiplicity. When fewer than `count`
  // entries sit above the minimum, the cut is the minimum itself.
  double floor = probs[0];
  std::size_t at_floor = 0;
  for (double p : probs) {
    if (p < floor) {
      floor = p;
      at_floor = 1;
    } else if (p == floor) {
      ++at_floor;
    }
  }
  const std::size_t above_floor = n - at_floor;
  if (above_floor < count) return {floor, count - above_floor};

  thread_local std::vector<double> scratch;
  scratch.assign(probs.begin(), probs.end());
  const auto kth = scratch.begin() + static_cast<std::ptrdiff_t>(count - 1);
  std::nth_element(scratch.begin(), kth, scratch.end(), std::greater<>());
  const double threshold = *kth;
  std::size_t above = 0;
  for (double p : probs) above += p > threshold ? 1 : 0;
  return {threshold, count - above};
}

// Walks ids in ascending order and reports membership in the cut.
class CutCursor {
 public:
  explicit CutCursor(TopCut cut) : cut_(cut) {}

  bool take(double p) {
    if (p > cut_.threshold) return true;
    if (p == cut_.threshold && used_ < cut_.ties) {
      ++used_;
      return true;
    }
    return false;
  }

 private:
  TopCut cut_;
  std::size_t used_ = 0;
};

// Small memo for decay(): most candidates share one of a few deltas (every
// token unseen in both contexts has the same one).
class DecayMemo {
 public:
  explicit DecayMemo(const DecayConfig& config) : config_(config) {}

  double operator()(double x) {
    for (std::size_t i = 0; i < used_; ++i) {
      if (keys_[i] == x) return values_[i];
    }
    const double alpha = decay(x, config_);
    keys_[next_] = x;
    values_[next_] = alpha;
    next_ = (next_ + 1) % keys_.size();
    used_ = std::min(used_ + 1, keys_.size());
    return alpha;
  }

 private:
  const DecayConfig& config_;
  std::array<double, 4> keys_{};
  std::array<double, 4> values_{};
  std::size_t used_ = 0;
  std::size_t next_ = 0;
};

// Reweights `probs` (the base distribution on entry) in place and normalizes
// it. Returns false when the caller should fall back to base; `probs` is then
// unspecified. `trace` is filled when non-null.
bool reconstruct_in_place(const std::vector<double>& expert, std::vector<double>& probs,
                          const ReconstructionConfig& config, ReconstructionTrace* trace) {
  if (expert.size() != probs.size()) throw std::invalid_argument("distribution size mismatch");
  const std::size_t v = probs.size();
  CutCursor in_expert(top_cut(expert, exposed_count(config.expert_top_fraction, v)));
  CutCursor in_base(top_cut(probs, exposed_count(config.base_top_fraction, v)));
  if (trace) {
    trace->delta.resize(v);
    for (std::size_t i = 0; i < v; ++i) trace->delta[i] = expert[i] - probs[i];
    trace->alpha.assign(v, 1.0);
    trace->candidate_set.clear();
  }

  DecayMemo memo(config.decay);
  bool any = false;
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    const bool e = in_expert.take(expert[i]);
    const bool b = in_base.take(probs[i]);
    if (e && b) {
      any = true;
      const double alpha = memo(expert[i] - probs[i]);
      probs[i] *= alpha;
      if (trace) {
        trace->candidate_set.push_back(static_cast<TokenId>(i));
        trace->alpha[i] = alpha;
      }
    }
    sum += probs[i];
  }
  if (!any) return false;

  if (config.normalization == Normalization::kSoftmax) {
    const double peak = *std::max_element(probs.begin(), probs.end());
    sum = 0.0;
    for (double& s : probs) {
      s = std::exp(s - peak);
      sum += s;
    }
    for (double& s : probs) s /= sum;
  } else {
    // Every surviving token decayed to zero mass; nothing sensible to rescale.
    if (!(sum > 0.0)) return false;
    const double inv = 1.0 / sum;
    for (double& s : probs) s *= inv;
  }
  return true;
}

// Membership rule shared by both cut representations: an id is inside when
// its probability beats `threshold`, or equals it and the id is below
// `tie_limit`.
struct SparseCut {
  double threshold = -1.0;
  std::size_t tie_limit = 0;

  bool contains(std::size_t id, double p) const { return p > threshold || (p == threshold && id < tie_limit); }
};

// The rank-th largest value among entries matching `keep`, and the tie limit
// that admits `ties` of the entries equal to it (ascending ids).
template <typename Keep>
SparseCut entry_cut(const SparseDistribution& d, std::size_t rank, Keep keep) {
  thread_local std::vector<double> scratch;
  scratch.clear();
  for (const auto& e : d.entries) {
    if (keep(e.second)) scratch.push_back(e.second);
  }
  const auto kth = scratch.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(scratch.begin(), kth, scratch.end(), std::greater<>());
  const double threshold = *kth;
  std::size_t above = 0;
  for (double p : scratch) above += p > threshold ? 1 : 0;
  std::size_t ties = rank - above;
  for (const auto& [id, p] : d.entries) {
    if (p == threshold && --ties == 0) return {threshold, static_cast<std::size_t>(id) + 1};
  }
  return {threshold, d.vocab_size};
}

SparseCut sparse_cut(const SparseDistribution& d, std::size_t count) {
  const std::size_t n = d.vocab_size;
  if (count >= n) return {};
  std::size_t above_floor = 0;
  std::size_t at_floor = n - d.entries.size();
  for (const auto& e : d.entries) {
    above_floor += e.second > d.floor ? 1 : 0;
    at_floor += e.second == d.floor ? 1 : 0;
  }
  if (above_floor >= count) {
    return entry_cut(d, count, [&](double p) { return p > d.floor; });
  }
  if (above_floor + at_floor < count) {
    return entry_cut(d, count - above_floor - at_floor, [&](double p) { return p < d.floor; });
  }
  // The cut falls on the floor: find the (count - above_floor)-th id, in
  // ascending order, among ids whose probability equals the floor.
  std::size_t id = count - above_floor - 1;
  for (const auto& [entry_id, p] : d.entries) {
    if (p == d.floor) continue;
    if (static_cast<std::size_t>(entry_id) <= id) {
      ++id;
    } else {
      break;
    }
  }
  return {d.floor, id + 1};
}

}  // namespace

std::vector<TokenId> candidate_intersection(const NextTokenDistribution& expert, const NextTokenDistribution& base,
                                            const ReconstructionConfig& config) {
  require_same_size(expert, base);
  const std::size_t v = base.size();
  CutCursor in_expert(top_cut(expert.probs, exposed_count(config.expert_top_fraction, v)));
  CutCursor in_base(top_cut(base.probs, exposed_count(config.base_top_fraction, v)));
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < v; ++i) {
    const bool e = in_expert.take(expert.probs[i]);
    const bool b = in_base.take(base.probs[i]);
    if (e && b) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

ReconstructionTrace reconstruct(const NextTokenDistribution& expert, const NextTokenDistribution& base,
                                const ReconstructionConfig& config) {
  require_same_size(expert, base);
  ReconstructionTrace trace;
  std::vector<double> out = base.probs;
  if (reconstruct_in_place(expert.probs, out, config, &trace)) {
    trace.output = NextTokenDistribution(std::move(out));
  } else {
    trace.fallback_used = true;
    trace.output = base;
  }
  return trace;
}

NextTokenDistribution reconstruct_sparse(const SparseDistribution& expert, const SparseDistribution& base,
                                         const ReconstructionConfig& config, bool* fallback_used) {
  if (expert.vocab_size != base.vocab_size || base.vocab_size == 0) {
    throw std::invalid_argument("distribution size mismatch");
  }
  const std::size_t v = base.vocab_size;
  const SparseCut cut_e = sparse_cut(expert, exposed_count(config.expert_top_fraction, v));
  const SparseCut cut_b = sparse_cut(base, exposed_count(config.base_top_fraction, v));
  if (fallback_used) *fallback_used = false;

  // Ids listed by either side, merged in ascending order with both values
  // and the reweighted base probability.
  struct Listed {
    std::size_t id;
    double base;
    double scaled;
  };
  thread_local std::vector<Listed> listed;
  listed.clear();
  DecayMemo memo(config.decay);
  bool any = false;
  auto visit = [&](std::size_t id, double pe, double pb) {
    double scaled = pb;
    if (cut_e.contains(id, pe) && cut_b.contains(id, pb)) {
      any = true;
      scaled = pb * memo(pe - pb);
    }
    listed.push_back({id, pb, scaled});
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < expert.entries.size() || j < base.entries.size()) {
    const auto ei = i < expert.entries.size() ? static_cast<std::size_t>(expert.entries[i].first) : v;
    const auto bj = j < base.entries.size() ? static_cast<std::size_t>(base.entries[j].first) : v;
    if (ei == bj) {
      visit(ei, expert.entries[i++].second, base.entries[j++].second);
    } else if (ei < bj) {
      visit(ei, expert.entries[i++].second, base.floor);
    } else {
      visit(bj, expert.floor, base.entries[j++].second);
    }
  }

  // Unlisted ids all carry (expert.floor, base.floor); the candidates among
  // them are exactly the unlisted ids below `limit`.
  auto floor_limit = [&](const SparseCut& cut, double floor) -> std::size_t {
    if (floor > cut.threshold) return v;
    return floor == cut.threshold ? std::min(cut.tie_limit, v) : 0;
  };
  const std::size_t limit = std::min(floor_limit(cut_e, expert.floor), floor_limit(cut_b, base.floor));
  std::size_t listed_below = 0;
  for (const auto& l : listed) listed_below += l.id < limit ? 1 : 0;
  const std::size_t floor_candidates = limit - listed_below;
  const std::size_t floor_others = v - listed.size() - floor_candidates;
  double floor_alpha = 1.0;
  if (floor_candidates > 0) {
    any = true;
    floor_alpha = memo(expert.floor - base.floor);
  }

  auto fall_back = [&] {
    if (fallback_used) *fallback_used = true;
    return base.dense();
  };
  if (!any) return fall_back();

  double candidate_value = base.floor * floor_alpha;
  double other_value = base.floor;
  double sum = 0.0;
  if (config.normalization == Normalization::kSoftmax) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const auto& l : listed) peak = std::max(peak, l.scaled);
    if (floor_candidates > 0) peak = std::max(peak, candidate_value);
    if (floor_others > 0) peak = std::max(peak, other_value);
    for (auto& l : listed) {
      l.scaled = std::exp(l.scaled - peak);
      sum += l.scaled;
    }
    candidate_value = std::exp(candidate_value - peak);
    other_value = std::exp(other_value - peak);
  } else {
    for (const auto& l : listed) sum += l.scaled;
  }
  sum += static_cast<double>(floor_candidates) * candidate_value + static_cast<double>(floor_others) * other_value;
  // Every surviving token decayed to zero mass; nothing sensible to rescale.
  if (!(sum > 0.0)) return fall_back();

  const double inv = 1.0 / sum;
  std::vector<double> probs(v, other_value * inv);
  std::fill(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(limit), candidate_value * inv);
  for (const auto& l : listed) probs[l.id] = l.scaled * inv;
  return NextTokenDistribution(std::move(probs));
}

std::pair<TokenId, ReconstructionTrace> debias_step(const LanguageModel& expert, const LanguageModel& base,
                                                    std::span<const TokenId> prefix,
                                                    const ReconstructionConfig& config, Rng& rng) {
  if (expert.vocab_size() != base.vocab_size()) throw std::invalid_argument("vocabulary mismatch");
  auto trace = reconstruct(expert.next_token_distribution(prefix), base.next_token_distribution(prefix), config);
  const TokenId chosen = select_token(trace.output, config.selection, rng);
  return {chosen, std::move(trace)};
}

ExpertGuidedDecoder::ExpertGuidedDecoder(const LanguageModel& expert, const LanguageModel& base,
                                         ReconstructionConfig config)
    : expert_(expert), base_(base), config_(std::move(config)) {
  if (expert.vocab_size() != base.vocab_size()) throw std::invalid_argument("vocabulary mismatch");
  config_.validate();
}

NextTokenDistribution ExpertGuidedDecoder::next_token_distribution(std::span<const TokenId> prefix) const {
  if (!observer_) {
    auto sparse_expert = expert_.sparse_distribution(prefix);
    if (sparse_expert) {
      if (auto sparse_base = base_.sparse_distribution(prefix)) {
        return reconstruct_sparse(*sparse_expert, *sparse_base, config_);
      }
    }
  }
  auto expert = expert_.next_token_distribution(prefix);
  auto base = base_.next_token_distribution(prefix);
  if (observer_) {
    auto trace = reconstruct(expert, base, config_);
    observer_(trace);
    return std::move(trace.output);
  }
  if (reconstruct_in_place(expert.probs, base.probs, config_, nullptr)) return base;
  // Rare: the reweighted mass vanished. Query again for the untouched base.
  return base_.next_token_distribution(prefix);
}

nlohmann::json trace_to_json(const ReconstructionTrace& trace, TokenId chosen) {
  nlohmann::json candidates = nlohmann::json::array();
  for (TokenId id : trace.candidate_set) {
    const auto i = static_cast<std::size_t>(id);
    candidates.push_back({id, trace.delta[i], trace.alpha[i]});
  }
  nlohmann::json j = {{"fallback", trace.fallback_used}, {"candidates", std::move(candidates)}};
  if (chosen >= 0) j["chosen"] = chosen;
  return j;
}

nlohmann::json config_to_json(const ReconstructionConfig& config) {
  return {{"decay", decay_family_name(config.decay.family)},
          {"lambda", config.decay.lambda},
          {"tau", config.decay.tau},
          {"expert_top_fraction", config.expert_top_fraction},
          {"base_top_fraction", config.base_top_fraction},
          {"normalization", normalization_name(config.normalization)},
          {"selection", config.selection.describe()}};
}

}  // namespace detox
