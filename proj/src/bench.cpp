// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "detox/generation.hpp"

namespace detox {

namespace {

using Clock = std::chrono::steady_clock;

struct SampleResult {
  AttributeReport attributes;
  double perplexity = 0.0;
  bool has_perplexity = false;
  std::size_t tokens = 0;
  std::size_t steps = 0;
  std::size_t fallbacks = 0;
  double seconds = 0.0;
};

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string variant_label(const ReconstructionVariant& v) {
  return std::string(decay_family_name(v.decay.family)) + "(lambda=" + format_number(v.decay.lambda) +
         ",tau=" + format_number(v.decay.tau) + "," + std::string(normalization_name(v.normalization)) + ")";
}

ReconstructionConfig make_reconstruction(const ExperimentConfig& config, const ReconstructionVariant& v) {
  ReconstructionConfig rc;
  rc.decay = v.decay;
  rc.normalization = v.normalization;
  rc.expert_top_fraction = config.expert_top_fraction;
  rc.base_top_fraction = config.base_top_fraction;
  rc.selection = config.selection;
  return rc;
}

// One generation + scoring pass over every (prompt, repetition) pair.
// variant == nullptr runs plain decoding of the base model.
BenchRow run_row(const ExperimentConfig& config, const BenchModels& models,
                 std::span<const AttributeLexicon> lexicons, const std::vector<TokenSequence>& prompt_ids,
                 const ReconstructionVariant* variant) {
  const auto reps = static_cast<std::size_t>(config.repetitions);
  const std::size_t total = prompt_ids.size() * reps;
  std::vector<SampleResult> results(total);

  std::optional<ReconstructionConfig> rc;
  if (variant) rc = make_reconstruction(config, *variant);

  auto work = [&](std::size_t slot) {
    const std::size_t prompt = slot / reps;
    GenerationConfig gen;
    gen.max_new_tokens = config.max_new_tokens;
    gen.selection = config.selection;
    gen.seed = derive_seed(config.seed, slot);
    gen.stop_token = models.vocab.eos_id();

    SampleResult& r = results[slot];
    const auto start = Clock::now();
    TokenSequence continuation;
    if (rc) {
      ExpertGuidedDecoder decoder(models.expert, models.base, *rc);
      decoder.set_observer([&r](const ReconstructionTrace& t) {
        ++r.steps;
        if (t.fallback_used) ++r.fallbacks;
      });
      continuation = generate(decoder, prompt_ids[prompt].ids, gen);
    } else {
      continuation = generate(models.base, prompt_ids[prompt].ids, gen);
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    r.tokens = continuation.size();
    r.attributes = score_attributes(detokenize(continuation.ids, models.vocab), lexicons);
    if (!continuation.empty()) {
      r.perplexity = reference_perplexity(models.reference, prompt_ids[prompt].ids, continuation);
      r.has_perplexity = true;
    }
  };

  const auto jobs = static_cast<std::size_t>(std::max(1, config.jobs));
  if (jobs == 1) {
    for (std::size_t slot = 0; slot < total; ++slot) work(slot);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t slot = w; slot < total; slot += jobs) work(slot);
      });
    }
    for (auto& t : pool) t.join();
  }

  BenchRow row;
  row.reconstruction = variant != nullptr;
  if (variant) row.variant = *variant;
  row.label = variant ? variant_label(*variant) : "baseline";
  row.selection = config.selection;
  row.seed = config.seed;

  std::vector<AttributeReport> reports;
  reports.reserve(total);
  double ppl_sum = 0.0;
  std::size_t ppl_count = 0;
  double seconds = 0.0;
  std::size_t steps = 0;
  std::size_t fallbacks = 0;
  for (const auto& r : results) {
    reports.push_back(r.attributes);
    if (r.has_perplexity) {
      ppl_sum += r.perplexity;
      ++ppl_count;
    }
    seconds += r.seconds;
    row.generated_tokens += r.tokens;
    steps += r.steps;
    fallbacks += r.fallbacks;
  }
  row.attributes = aggregate(reports);
  row.mean_perplexity = ppl_count ? ppl_sum / static_cast<double>(ppl_count) : 0.0;
  row.latency_ms_per_token = row.generated_tokens ? 1000.0 * seconds / static_cast<double>(row.generated_tokens) : 0.0;
  row.fallback_rate = steps ? static_cast<double>(fallbacks) / static_cast<double>(steps) : 0.0;
  return row;
}

void fill_reductions(BenchReport& report) {
  const auto& base = report.rows.front().attributes.mean;
  for (auto& row : report.rows) {
    for (std::size_t i = 0; i < kNumAttributes; ++i) {
      row.reduction_pct[i] = base[i] > 0.0 ? 100.0 * (base[i] - row.attributes.mean[i]) / base[i] : 0.0;
    }
  }
}

nlohmann::json base_metadata(const ExperimentConfig& config, const BenchModels& models) {
  return {{"prompts", config.prompts.size()},
          {"max_new_tokens", config.max_new_tokens},
          {"seed", config.seed},
          {"repetitions", config.repetitions},
          {"expert_top_fraction", config.expert_top_fraction},
          {"base_top_fraction", config.base_top_fraction},
          {"selection", config.selection.describe()},
          {"vocab_size", models.vocab.size()},
          {"vocab_hash", models.vocab.hash()}};
}

nlohmann::json scores_json(const AttributeScores& s) {
  nlohmann::json j = nlohmann::json::object();
  for (Attribute a : kAllAttributes) j[std::string(attribute_name(a))] = s[index_of(a)];
  return j;
}

nlohmann::json row_to_json(const BenchRow& row, bool with_timing) {
  nlohmann::json j = {{"label", row.label},
                      {"reconstruction", row.reconstruction},
                      {"selection", row.selection.describe()},
                      {"seed", row.seed},
                      {"samples", row.attributes.count},
                      {"mean", scores_json(row.attributes.mean)},
                      {"fraction_above_0.5", scores_json(row.attributes.fraction_above_half)},
                      {"reduction_pct", scores_json(row.reduction_pct)},
                      {"mean_perplexity", row.mean_perplexity},
                      {"fallback_rate", row.fallback_rate},
                      {"generated_tokens", row.generated_tokens}};
  if (row.reconstruction) {
    j["decay"] = decay_family_name(row.variant.decay.family);
    j["lambda"] = row.variant.decay.lambda;
    j["tau"] = row.variant.decay.tau;
    j["normalization"] = normalization_name(row.variant.normalization);
  }
  if (!row.slices.empty()) j["slices"] = row.slices;
  if (with_timing) j["latency_ms_per_token"] = row.latency_ms_per_token;
  return j;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

std::vector<double> unique_sorted(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (prompts.empty()) throw std::invalid_argument("no prompts");
  if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (!(expert_top_fraction > 0.0 && expert_top_fraction <= 1.0) ||
      !(base_top_fraction > 0.0 && base_top_fraction <= 1.0)) {
    throw std::invalid_argument("candidate fractions must lie in (0, 1]");
  }
  selection.validate();
  for (const auto& v : grid) v.decay.validate();
}

BenchReport run_generation_bench(const ExperimentConfig& config, const BenchModels& models,
                                 std::span<const AttributeLexicon> lexicons) {
  config.validate();
  if (models.expert.vocab_size() != models.vocab.size() || models.base.vocab_size() != models.vocab.size() ||
      models.reference.vocab_size() != models.vocab.size()) {
    throw std::invalid_argument("models do not share the vocabulary");
  }

  std::vector<TokenSequence> prompt_ids;
  prompt_ids.reserve(config.prompts.size());
  for (const auto& p : config.prompts) prompt_ids.push_back(tokenize(p.text, models.vocab, SequenceRole::kPrefix));

  std::vector<ReconstructionVariant> grid;
  for (const auto& v : config.grid) {
    if (std::find(grid.begin(), grid.end(), v) == grid.end()) grid.push_back(v);
  }

  BenchReport report;
  report.experiment = "generation";
  report.metadata = base_metadata(config, models);
  report.rows.push_back(run_row(config, models, lexicons, prompt_ids, nullptr));
  for (const auto& v : grid) report.rows.push_back(run_row(config, models, lexicons, prompt_ids, &v));
  fill_reductions(report);
  return report;
}

BenchReport run_decay_comparison(ExperimentConfig config, const BenchModels& models,
                                 std::span<const AttributeLexicon> lexicons) {
  constexpr double kLambda = 100.0;
  constexpr double kTau = 0.05;
  const Normalization mode = config.grid.empty() ? Normalization::kRenormalize : config.grid.front().normalization;
  config.grid.clear();
  for (auto family : {DecayFamily::kExponential, DecayFamily::kLinear, DecayFamily::kInversePower,
                      DecayFamily::kLogistic}) {
    config.grid.push_back({DecayConfig{family, kLambda, kTau}, mode});
  }
  auto report = run_generation_bench(config, models, lexicons);
  report.experiment = "decay";
  report.metadata["lambda"] = kLambda;
  report.metadata["tau"] = kTau;
  report.metadata["attributes"] = {"toxicity", "sexually_explicit", "threat"};

  const double exp_tox = report.rows[1].attributes.mean[index_of(Attribute::kToxicity)];
  const double lin_tox = report.rows[2].attributes.mean[index_of(Attribute::kToxicity)];
  if (exp_tox > lin_tox) {
    report.warnings.push_back("expected trend not met: exponential toxicity " + format_number(exp_tox) +
                              " exceeds linear " + format_number(lin_tox));
  }
  return report;
}

BenchReport run_sweep(std::span<const double> lambdas, std::span<const double> taus, ExperimentConfig config,
                      const BenchModels& models, std::span<const AttributeLexicon> lexicons) {
  const auto ls = unique_sorted(lambdas);
  const auto ts = unique_sorted(taus);
  if (ls.empty() || ts.empty()) throw std::invalid_argument("empty sweep grid");
  const Normalization mode = config.grid.empty() ? Normalization::kRenormalize : config.grid.front().normalization;
  config.grid.clear();
  for (double l : ls) {
    for (double t : ts) config.grid.push_back({DecayConfig{DecayFamily::kExponential, l, t}, mode});
  }
  auto report = run_generation_bench(config, models, lexicons);
  report.experiment = "sweep";
  report.metadata["lambdas"] = ls;
  report.metadata["taus"] = ts;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    auto& row = report.rows[i];
    if (row.variant.decay.tau == 0.05) row.slices.push_back("lambda");
    if (row.variant.decay.lambda == 100.0) row.slices.push_back("tau");
  }
  return report;
}

TradeoffResult run_tradeoff(std::span<const double> lambdas, ExperimentConfig config, const BenchModels& models,
                            std::span<const AttributeLexicon> lexicons, double tau) {
  const auto ls = unique_sorted(lambdas);
  if (ls.empty()) throw std::invalid_argument("empty lambda grid");
  const Normalization mode = config.grid.empty() ? Normalization::kRenormalize : config.grid.front().normalization;
  config.grid.clear();
  for (double l : ls) config.grid.push_back({DecayConfig{DecayFamily::kExponential, l, tau}, mode});
  const auto report = run_generation_bench(config, models, lexicons);

  TradeoffResult result;
  result.tau = tau;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    result.points.push_back(
        {row.variant.decay.lambda, row.attributes.mean[index_of(Attribute::kToxicity)], row.mean_perplexity});
  }
  for (std::size_t i = 1; i < result.points.size(); ++i) {
    const auto& prev = result.points[i - 1];
    const auto& cur = result.points[i];
    if (cur.mean_perplexity < prev.mean_perplexity) {
      result.warnings.push_back("expected trend not met: perplexity falls from lambda=" + format_number(prev.lambda) +
                                " to lambda=" + format_number(cur.lambda));
    }
    if (cur.mean_toxicity > prev.mean_toxicity) {
      result.warnings.push_back("expected trend not met: toxicity rises from lambda=" + format_number(prev.lambda) +
                                " to lambda=" + format_number(cur.lambda));
    }
  }
  return result;
}

std::vector<LatencyStrategy> default_latency_strategies() {
  return {{"greedy", false, SelectionStrategy::greedy()},
          {"top_k", false, SelectionStrategy::top_k(20)},
          {"top_p", false, SelectionStrategy::top_p(0.9)},
          {"expert_guided", true, SelectionStrategy::greedy()}};
}

std::vector<LatencyRow> run_latency(std::span<const LatencyStrategy> strategies, std::size_t n_prompts,
                                    int fixed_length, const ExperimentConfig& config, const BenchModels& models,
                                    const ReconstructionConfig& reconstruction) {
  if (strategies.empty()) throw std::invalid_argument("no strategies");
  if (config.prompts.empty()) throw std::invalid_argument("no prompts");
  if (fixed_length < 1) throw std::invalid_argument("fixed_length must be >= 1");

  std::vector<TokenSequence> prompt_ids;
  for (std::size_t i = 0; i < n_prompts; ++i) {
    prompt_ids.push_back(tokenize(config.prompts[i % config.prompts.size()].text, models.vocab, SequenceRole::kPrefix));
  }

  std::vector<std::unique_ptr<ExpertGuidedDecoder>> decoders;
  std::vector<GenerationConfig> gens;
  for (const auto& s : strategies) {
    s.selection.validate();
    ReconstructionConfig rc = reconstruction;
    rc.selection = s.selection;
    decoders.push_back(s.reconstruction ? std::make_unique<ExpertGuidedDecoder>(models.expert, models.base, rc)
                                        : nullptr);
    GenerationConfig gen;
    gen.max_new_tokens = fixed_length;
    gen.selection = s.selection;
    gens.push_back(gen);
  }
  auto run_one = [&](std::size_t s, std::size_t prompt) {
    auto gen = gens[s];
    gen.seed = derive_seed(config.seed, prompt);
    const LanguageModel& model = decoders[s] ? static_cast<const LanguageModel&>(*decoders[s]) : models.base;
    return generate(model, prompt_ids[prompt].ids, gen).size();
  };

  if (!prompt_ids.empty()) {
    for (std::size_t s = 0; s < strategies.size(); ++s) run_one(s, 0);  // warm-up
  }

  std::vector<double> seconds(strategies.size(), 0.0);
  std::vector<std::size_t> tokens(strategies.size(), 0);
  for (std::size_t p = 0; p < prompt_ids.size(); ++p) {
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      const auto start = Clock::now();
      tokens[s] += run_one(s, p);
      seconds[s] += std::chrono::duration<double>(Clock::now() - start).count();
    }
  }

  std::vector<LatencyRow> rows;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    LatencyRow row;
    row.strategy = strategies[s].name;
    row.continuations = prompt_ids.size();
    row.tokens = tokens[s];
    row.ms_per_token = tokens[s] ? 1000.0 * seconds[s] / static_cast<double>(tokens[s]) : 0.0;
    row.ms_per_continuation = prompt_ids.empty() ? 0.0 : 1000.0 * seconds[s] / static_cast<double>(prompt_ids.size());
    rows.push_back(row);
  }
  auto unit = std::find_if(rows.begin(), rows.end(), [](const LatencyRow& r) { return r.strategy == "greedy"; });
  if (unit == rows.end()) unit = rows.begin();
  const double unit_ms = unit->ms_per_token;
  for (auto& row : rows) row.relative = unit_ms > 0.0 ? row.ms_per_token / unit_ms : 0.0;
  unit->relative = 1.0;
  return rows;
}

nlohmann::json report_to_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) rows.push_back(row_to_json(row, true));
  return {{"experiment", report.experiment},
          {"metadata", report.metadata},
          {"rows", std::move(rows)},
          {"warnings", report.warnings}};
}

nlohmann::json report_to_json_deterministic(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) rows.push_back(row_to_json(row, false));
  return {{"experiment", report.experiment},
          {"metadata", report.metadata},
          {"rows", std::move(rows)},
          {"warnings", report.warnings}};
}

void write_report_json(const BenchReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << report_to_json(report).dump(2) << '\n';
}

void write_report_csv(const BenchReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "experiment,label,reconstruction,decay,lambda,tau,normalization,selection,seed,samples";
  for (Attribute a : kAllAttributes) out << ',' << attribute_name(a);
  for (Attribute a : kAllAttributes) out << ",reduction_pct_" << attribute_name(a);
  for (Attribute a : kAllAttributes) out << ",above_half_" << attribute_name(a);
  out << ",mean_perplexity,latency_ms_per_token,fallback_rate,generated_tokens,slices\n";
  for (const auto& row : report.rows) {
    out << report.experiment << ",\"" << row.label << "\"," << (row.reconstruction ? 1 : 0) << ',';
    if (row.reconstruction) {
      out << decay_family_name(row.variant.decay.family) << ',' << row.variant.decay.lambda << ','
          << row.variant.decay.tau << ',' << normalization_name(row.variant.normalization);
    } else {
      out << ",,,";
    }
    out << ",\"" << row.selection.describe() << "\"," << row.seed << ',' << row.attributes.count;
    for (double v : row.attributes.mean) out << ',' << v;
    for (double v : row.reduction_pct) out << ',' << v;
    for (double v : row.attributes.fraction_above_half) out << ',' << v;
    out << ',' << row.mean_perplexity << ',' << row.latency_ms_per_token << ',' << row.fallback_rate << ','
        << row.generated_tokens << ',';
    for (std::size_t i = 0; i < row.slices.size(); ++i) out << (i ? ";" : "") << row.slices[i];
    out << '\n';
  }
}

void write_tradeoff_csv(const TradeoffResult& result, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "lambda,tau,mean_toxicity,mean_perplexity\n";
  for (const auto& p : result.points) {
    out << p.lambda << ',' << result.tau << ',' << p.mean_toxicity << ',' << p.mean_perplexity << '\n';
  }
}

void write_latency_csv(std::span<const LatencyRow> rows, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "strategy,continuations,tokens,ms_per_token,ms_per_continuation,relative\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.continuations << ',' << r.tokens << ',' << r.ms_per_token << ','
        << r.ms_per_continuation << ',' << r.relative << '\n';
  }
}

}  // namespace detox
