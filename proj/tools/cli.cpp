// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "detox/bench.hpp"
#include "detox/bridge_client.hpp"
#include "detox/corpus.hpp"
#include "detox/generation.hpp"
#include "detox/ngram.hpp"
#include "detox/reconstruct.hpp"
#include "detox/sampling.hpp"
#include "detox/scoring.hpp"
#include "detox/synthetic.hpp"
#include "detox/vocab.hpp"

namespace detox::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Input problems that should surface as exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodingFlags {
  double lambda = 50.0;
  double tau = 0.05;
  double expert_frac = 0.30;
  double base_frac = 0.50;
  std::string norm = "renorm";
  std::string decay = "exp";
  std::string select = "greedy";
  int top_k = 20;
  double top_p = 0.8;
  int max_new_tokens = 24;
  std::uint64_t seed = 42;

  SelectionStrategy selection() const {
    SelectionStrategy s;
    s.kind = parse_selection_kind(select);
    s.k = top_k;
    s.p = top_p;
    s.validate();
    return s;
  }

  ReconstructionConfig reconstruction() const {
    ReconstructionConfig rc;
    rc.decay = {parse_decay_family(decay), lambda, tau};
    rc.normalization = parse_normalization(norm);
    rc.expert_top_fraction = expert_frac;
    rc.base_top_fraction = base_frac;
    rc.selection = selection();
    rc.validate();
    return rc;
  }

  json provenance() const {
    return {{"lambda", lambda},   {"tau", tau},       {"expert_frac", expert_frac}, {"base_frac", base_frac},
            {"norm", norm},       {"decay", decay},   {"select", select},           {"top_k", top_k},
            {"top_p", top_p},     {"seed", seed},     {"max_new_tokens", max_new_tokens}};
  }
};

void add_decoding_flags(CLI::App& cmd, DecodingFlags& f) {
  cmd.add_option("--lambda", f.lambda, "Decay rate lambda")->capture_default_str();
  cmd.add_option("--tau", f.tau, "Decay threshold tau")->capture_default_str();
  cmd.add_option("--expert-frac", f.expert_frac, "Share of the vocabulary exposed from the expert")
      ->capture_default_str();
  cmd.add_option("--base-frac", f.base_frac, "Share of the vocabulary exposed from the base model")
      ->capture_default_str();
  cmd.add_option("--norm", f.norm, "Normalization after reweighting")
      ->check(CLI::IsMember({"softmax", "renorm", "renormalize"}))
      ->capture_default_str();
  cmd.add_option("--decay", f.decay, "Decay family")
      ->check(CLI::IsMember({"exp", "linear", "invpow", "logistic"}))
      ->capture_default_str();
  cmd.add_option("--select", f.select, "Token selection")
      ->check(CLI::IsMember({"greedy", "top_k", "top_p"}))
      ->capture_default_str();
  cmd.add_option("--top-k", f.top_k, "k for top_k selection")->capture_default_str();
  cmd.add_option("--top-p", f.top_p, "p for top_p selection")->capture_default_str();
  cmd.add_option("--max-new-tokens", f.max_new_tokens, "Tokens generated per prompt")->capture_default_str();
  cmd.add_option("--seed", f.seed, "Master seed")->capture_default_str();
}

struct TrainingFlags {
  int order = 3;
  double smoothing_k = 0.1;
  double mix_beta = 0.3;
  int epochs = 10;
  int batch_size = 8;

  TrainingConfig config() const {
    TrainingConfig c;
    c.order = order;
    c.smoothing_k = smoothing_k;
    c.mix_beta = mix_beta;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.validate();
    return c;
  }
};

void add_training_flags(CLI::App& cmd, TrainingFlags& f) {
  cmd.add_option("--order", f.order, "N-gram order")->capture_default_str();
  cmd.add_option("--smoothing-k", f.smoothing_k, "Add-k constant")->capture_default_str();
  cmd.add_option("--mix-beta", f.mix_beta, "Interpolation weight toward --base-model")->capture_default_str();
  cmd.add_option("--epochs", f.epochs, "Recorded in model metadata")->capture_default_str();
  cmd.add_option("--batch-size", f.batch_size, "Recorded in model metadata")->capture_default_str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

std::vector<PromptRecord> take_prompts(const fs::path& path, bool challenging_only, int limit) {
  auto prompts = load_prompts(path, challenging_only);
  if (limit > 0 && prompts.size() > static_cast<std::size_t>(limit)) prompts.resize(static_cast<std::size_t>(limit));
  if (prompts.empty()) throw UsageError("no prompts selected from " + path.string());
  return prompts;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  std::uint64_t seed = DeskCorpusConfig{}.seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  DeskCorpusConfig config;
  config.seed = a.seed;
  const auto corpus = make_desk_corpus(config);
  write_desk_corpus(corpus, a.out_dir);
  out << "wrote " << corpus.toxic.size() << " toxic, " << corpus.general.size() << " general, "
      << corpus.reference.size() << " reference documents and " << corpus.prompts.size() << " prompts to "
      << a.out_dir << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus;
  std::string format = "jsonl";
  std::vector<std::string> keep_labels;
  bool keep_all = false;
  std::string heldout;
  double heldout_frac = 0.1;
  std::string vocab;
  std::string vocab_out;
  std::string base_model;
  std::string model_out;
  TrainingFlags training;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  if (a.vocab.empty() == a.vocab_out.empty()) throw UsageError("exactly one of --vocab and --vocab-out is required");
  if (!a.base_model.empty() && a.vocab.empty()) throw UsageError("--base-model requires --vocab");

  std::set<std::string> keep;
  if (!a.keep_all) {
    keep = a.keep_labels.empty() ? default_keep_labels()
                                 : std::set<std::string>(a.keep_labels.begin(), a.keep_labels.end());
  }
  const auto format = parse_corpus_format(a.format);
  auto examples = load_labeled_corpus(a.corpus, format, keep);
  if (examples.empty()) throw UsageError("no examples left in " + a.corpus + " after label filtering");

  std::vector<LabeledExample> heldout;
  if (!a.heldout.empty()) {
    heldout = load_labeled_corpus(a.heldout, format, keep);
  } else {
    if (!(a.heldout_frac >= 0.0 && a.heldout_frac < 1.0)) throw UsageError("--heldout-frac must lie in [0, 1)");
    const auto n_held = static_cast<std::size_t>(a.heldout_frac * static_cast<double>(examples.size()));
    if (n_held > 0 && n_held < examples.size()) {
      heldout.assign(examples.end() - static_cast<std::ptrdiff_t>(n_held), examples.end());
      examples.resize(examples.size() - n_held);
    }
  }

  Vocabulary vocab;
  if (!a.vocab.empty()) {
    vocab = load_vocabulary(a.vocab);
  } else {
    std::vector<LabeledExample> all = examples;
    all.insert(all.end(), heldout.begin(), heldout.end());
    vocab = build_vocabulary(all);
    save_vocabulary(vocab, a.vocab_out);
  }

  const auto config = a.training.config();
  std::optional<NGramModel> base;
  if (!a.base_model.empty()) base = load_model(a.base_model, vocab);
  const auto model = train_ngram(tokenize_all(examples, vocab), config, vocab, base ? &*base : nullptr);
  save_model(model, vocab, a.model_out);

  out << "trained order-" << config.order << " model on " << examples.size() << " sequences, vocab " << vocab.size()
      << " (" << vocab.hash() << ")\n";
  if (!heldout.empty()) {
    double total_nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& seq : tokenize_all(heldout, vocab)) {
      if (seq.empty()) continue;
      total_nll += nll(model, seq) * static_cast<double>(seq.size());
      tokens += seq.size();
    }
    if (tokens > 0) {
      const double mean = total_nll / static_cast<double>(tokens);
      out << "held-out NLL " << mean << " nats/token (PPL " << std::exp(mean) << ") over " << heldout.size()
          << " sequences\n";
    }
  } else {
    out << "held-out NLL: no held-out sequences\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string prompts;
  bool challenging_only = false;
  int limit = 0;
  std::string vocab;
  std::string base_model;
  std::string expert_model;
  bool debias = false;
  bool trace = false;
  bool stop_at_eos = false;
  std::string out_path;
  DecodingFlags decoding;
};

// Shared by generate and bridge-generate; base may be remote.
void write_continuations(const GenerateArgs& a, const Vocabulary& vocab, const LanguageModel& base,
                         const LanguageModel* expert, std::ostream& out) {
  const auto prompts = take_prompts(a.prompts, a.challenging_only, a.limit);
  const auto selection = a.decoding.selection();
  std::optional<ReconstructionConfig> rc;
  if (expert) rc = a.decoding.reconstruction();

  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto prefix = tokenize(prompts[i].text, vocab, SequenceRole::kPrefix);
    GenerationConfig gen;
    gen.max_new_tokens = a.decoding.max_new_tokens;
    gen.selection = selection;
    gen.seed = derive_seed(a.decoding.seed, i);
    if (a.stop_at_eos) gen.stop_token = vocab.eos_id();

    std::vector<ReconstructionTrace> traces;
    TokenSequence continuation;
    if (rc) {
      ExpertGuidedDecoder decoder(*expert, base, *rc);
      if (a.trace) decoder.set_observer([&traces](const ReconstructionTrace& t) { traces.push_back(t); });
      continuation = generate(decoder, prefix.ids, gen);
    } else {
      continuation = generate(base, prefix.ids, gen);
    }

    json line = {{"prompt", prompts[i].text},
                 {"continuation", detokenize(continuation.ids, vocab)},
                 {"continuation_ids", continuation.ids}};
    if (a.trace && rc) {
      json steps = json::array();
      for (std::size_t s = 0; s < traces.size(); ++s) {
        const TokenId chosen = s < continuation.size() ? continuation.ids[s] : vocab.eos_id();
        steps.push_back(trace_to_json(traces[s], chosen));
      }
      line["trace"] = std::move(steps);
    }
    out << line.dump() << '\n';
  }
}

int cmd_generate(const GenerateArgs& a) {
  if (a.debias && a.expert_model.empty()) throw UsageError("--debias requires --expert-model");
  if (a.trace && !a.debias) throw UsageError("--trace requires --debias");
  const auto vocab = load_vocabulary(a.vocab);
  const auto base = load_model(a.base_model, vocab);
  std::optional<NGramModel> expert;
  if (a.debias) expert = load_model(a.expert_model, vocab);
  auto out = open_out(a.out_path);
  write_continuations(a, vocab, base, expert ? &*expert : nullptr, out);
  return kOk;
}

// ---------------------------------------------------------------- bridge-generate

struct BridgeArgs {
  GenerateArgs generate;
  std::string command;
  std::string host;
  int port = 0;
  std::size_t top_m = BridgeLanguageModel::kDefaultTopM;
};

int cmd_bridge_generate(const BridgeArgs& a) {
  const auto& g = a.generate;
  if (a.command.empty() == a.host.empty()) throw UsageError("exactly one of --bridge-cmd and --bridge-host is required");
  if (!a.host.empty() && a.port <= 0) throw UsageError("--bridge-host requires --bridge-port");
  if (g.debias && g.expert_model.empty()) throw UsageError("--debias requires --expert-model");
  if (g.trace && !g.debias) throw UsageError("--trace requires --debias");

  const auto vocab = load_vocabulary(g.vocab);
  std::optional<NGramModel> expert;
  if (g.debias) expert = load_model(g.expert_model, vocab);
  auto channel = a.command.empty() ? connect_tcp_channel(a.host, a.port) : spawn_process_channel(a.command);
  BridgeLanguageModel base(std::move(channel), vocab, a.top_m);
  auto out = open_out(g.out_path);
  write_continuations(g, vocab, base, expert ? &*expert : nullptr, out);
  return kOk;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string input;
  std::string field = "continuation";
  std::string lexicons;
  std::string out_path;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const auto lexicons = a.lexicons.empty() ? default_lexicons() : load_lexicons(a.lexicons);
  std::ifstream in(a.input);
  if (!in) throw UsageError("cannot open " + a.input);

  std::unique_ptr<std::ofstream> file;
  if (!a.out_path.empty()) file = std::make_unique<std::ofstream>(open_out(a.out_path));
  std::ostream& sink = file ? static_cast<std::ostream&>(*file) : out;

  std::vector<AttributeReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(a.input, line_no, "invalid JSON");
    }
    std::string text;
    if (record.is_object() && record.contains(a.field) && record[a.field].is_string()) {
      text = record[a.field].get<std::string>();
    } else if (record.is_object() && record.contains("text") && record["text"].is_string()) {
      text = record["text"].get<std::string>();
    } else {
      throw ParseError(a.input, line_no, "missing string field \"" + a.field + "\"");
    }
    reports.push_back(score_attributes(text, lexicons));
    json row = report_to_json(reports.back());
    row["line"] = line_no;
    sink << row.dump() << '\n';
  }
  sink << json{{"aggregate", aggregate_to_json(aggregate(reports))}}.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string experiment;
  std::string data_dir = "data";
  std::string prompts;
  std::string vocab;
  std::string base_model;
  std::string expert_model;
  std::string reference_model;
  std::string lexicons;
  std::string out_dir = "reports";
  int num_prompts = 200;
  bool all_prompts = false;
  int repetitions = 1;
  int jobs = 1;
  int latency_continuations = 100;
  std::vector<double> lambdas;
  std::vector<double> taus;
  DecodingFlags decoding;
  TrainingFlags training;
};

struct LoadedModels {
  Vocabulary vocab;
  std::unique_ptr<NGramModel> base;
  std::unique_ptr<NGramModel> expert;
  std::unique_ptr<NGramModel> reference;
};

LoadedModels load_bench_models(const BenchArgs& a, std::ostream& out) {
  LoadedModels m;
  const bool explicit_models = !a.vocab.empty() || !a.base_model.empty() || !a.expert_model.empty() ||
                               !a.reference_model.empty();
  if (explicit_models) {
    if (a.vocab.empty() || a.base_model.empty() || a.expert_model.empty() || a.reference_model.empty()) {
      throw UsageError("--vocab, --base-model, --expert-model and --reference-model go together");
    }
    m.vocab = load_vocabulary(a.vocab);
    m.base = std::make_unique<NGramModel>(load_model(a.base_model, m.vocab));
    m.expert = std::make_unique<NGramModel>(load_model(a.expert_model, m.vocab));
    m.reference = std::make_unique<NGramModel>(load_model(a.reference_model, m.vocab));
    return m;
  }
  const fs::path dir(a.data_dir);
  DeskCorpus corpus;
  for (auto [name, slot] : {std::pair{"toxic.jsonl", &corpus.toxic}, std::pair{"general.jsonl", &corpus.general},
                            std::pair{"reference.jsonl", &corpus.reference}}) {
    const auto path = dir / name;
    if (!fs::exists(path)) throw UsageError("missing " + path.string() + " (run `detox synth` or pass model files)");
    *slot = load_labeled_corpus(path, CorpusFormat::kJsonl);
  }
  corpus.prompts = load_prompts(a.prompts.empty() ? dir / "prompts.jsonl" : fs::path(a.prompts), false);
  auto desk = build_desk_models(corpus, a.training.config());
  out << "trained desk models from " << dir.string() << ", vocab " << desk.vocab.size() << '\n';
  m.vocab = std::move(desk.vocab);
  m.base = std::make_unique<NGramModel>(std::move(desk.base));
  m.expert = std::make_unique<NGramModel>(std::move(desk.expert));
  m.reference = std::make_unique<NGramModel>(std::move(desk.reference));
  return m;
}

void print_rows(const BenchReport& report, std::ostream& out) {
  const auto tox = index_of(Attribute::kToxicity);
  for (const auto& row : report.rows) {
    out << row.label << ": toxicity " << row.attributes.mean[tox] << " (" << row.reduction_pct[tox]
        << "% reduction), ppl " << row.mean_perplexity << '\n';
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
}

int cmd_bench(const BenchArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  static const std::set<std::string> kExperiments = {"generation", "decay", "sweep", "tradeoff", "latency"};
  if (!kExperiments.count(a.experiment)) throw UsageError("unknown experiment: " + a.experiment);

  auto models = load_bench_models(a, out);
  const BenchModels bench_models{models.vocab, *models.expert, *models.base, *models.reference};
  const auto lexicons = a.lexicons.empty() ? default_lexicons() : load_lexicons(a.lexicons);
  const fs::path prompt_path = a.prompts.empty() ? fs::path(a.data_dir) / "prompts.jsonl" : fs::path(a.prompts);

  ExperimentConfig config;
  config.prompts = take_prompts(prompt_path, !a.all_prompts, a.num_prompts);
  config.max_new_tokens = a.decoding.max_new_tokens;
  config.expert_top_fraction = a.decoding.expert_frac;
  config.base_top_fraction = a.decoding.base_frac;
  config.selection = a.decoding.selection();
  config.seed = a.decoding.seed;
  config.repetitions = a.repetitions;
  config.jobs = a.jobs;
  const auto rc = a.decoding.reconstruction();
  config.grid.push_back({rc.decay, rc.normalization});

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  json provenance = {{"argv", argv}, {"flags", a.decoding.provenance()}};

  auto finish = [&](BenchReport report) {
    report.metadata["cli"] = provenance;
    write_report_json(report, dir / "report.json");
    write_report_csv(report, dir / "report.csv");
    print_rows(report, out);
    out << "wrote " << (dir / "report.csv").string() << '\n';
  };

  if (a.experiment == "generation") {
    finish(run_generation_bench(config, bench_models, lexicons));
  } else if (a.experiment == "decay") {
    finish(run_decay_comparison(config, bench_models, lexicons));
  } else if (a.experiment == "sweep") {
    const std::vector<double> lambdas = a.lambdas.empty() ? std::vector<double>{50, 100, 150} : a.lambdas;
    const std::vector<double> taus = a.taus.empty() ? std::vector<double>{0.0, 0.05, 0.1} : a.taus;
    finish(run_sweep(lambdas, taus, config, bench_models, lexicons));
  } else if (a.experiment == "tradeoff") {
    const std::vector<double> lambdas = a.lambdas.empty() ? std::vector<double>{50, 100, 150} : a.lambdas;
    const auto result = run_tradeoff(lambdas, config, bench_models, lexicons, a.decoding.tau);
    write_tradeoff_csv(result, dir / "tradeoff.csv");
    for (const auto& p : result.points) {
      out << "lambda " << p.lambda << ": toxicity " << p.mean_toxicity << ", ppl " << p.mean_perplexity << '\n';
    }
    for (const auto& w : result.warnings) out << "warning: " << w << '\n';
    out << "wrote " << (dir / "tradeoff.csv").string() << '\n';
  } else {
    const auto strategies = default_latency_strategies();
    const auto rows = run_latency(strategies, static_cast<std::size_t>(a.latency_continuations),
                                  a.decoding.max_new_tokens, config, bench_models, rc);
    write_latency_csv(rows, dir / "latency.csv");
    for (const auto& r : rows) {
      out << r.strategy << ": " << r.ms_per_token << " ms/token (" << r.relative << "x greedy)\n";
    }
    out << "wrote " << (dir / "latency.csv").string() << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expert-guided toxic-token extinction decoding", "detox"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "detox 0.1.0");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic desk corpus");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an add-k n-gram model");
  train_cmd->add_option("--corpus", train.corpus, "Training corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--format", train.format, "Corpus format")
      ->check(CLI::IsMember({"jsonl", "tsv", "plain"}))
      ->capture_default_str();
  train_cmd->add_option("--keep-labels", train.keep_labels, "Labels kept (default: the hate-speech label set)")
      ->delimiter(',');
  train_cmd->add_flag("--keep-all", train.keep_all, "Keep every label");
  train_cmd->add_option("--heldout", train.heldout, "Held-out corpus for NLL")->check(CLI::ExistingFile);
  train_cmd->add_option("--heldout-frac", train.heldout_frac, "Tail share held out when --heldout is absent")
      ->capture_default_str();
  train_cmd->add_option("--vocab", train.vocab, "Existing vocabulary")->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab-out", train.vocab_out, "Build a vocabulary from the corpus and write it here");
  train_cmd->add_option("--base-model", train.base_model, "Model to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--model-out", train.model_out, "Output model")->required();
  add_training_flags(*train_cmd, train.training);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Continue prompts with a local base model");
  auto add_generate_flags = [](CLI::App& cmd, GenerateArgs& g, bool local_base) {
    cmd.add_option("--prompts", g.prompts, "Prompt JSONL")->required()->check(CLI::ExistingFile);
    cmd.add_flag("--challenging-only", g.challenging_only, "Keep challenging prompts only");
    cmd.add_option("--limit", g.limit, "Use at most this many prompts (0 = all)");
    cmd.add_option("--vocab", g.vocab, "Vocabulary")->required()->check(CLI::ExistingFile);
    if (local_base) {
      cmd.add_option("--base-model", g.base_model, "Base model")->required()->check(CLI::ExistingFile);
    }
    cmd.add_option("--expert-model", g.expert_model, "Expert model")->check(CLI::ExistingFile);
    cmd.add_flag("--debias", g.debias, "Decode through the expert-guided reconstruction");
    cmd.add_flag("--trace", g.trace, "Attach per-step reconstruction traces");
    cmd.add_flag("--stop-at-eos", g.stop_at_eos, "End a continuation at </s>");
    cmd.add_option("--out", g.out_path, "Output JSONL")->required();
    add_decoding_flags(cmd, g.decoding);
  };
  add_generate_flags(*gen_cmd, gen, true);

  BridgeArgs bridge;
  auto* bridge_cmd = app.add_subcommand("bridge-generate", "Continue prompts with a remote base model");
  add_generate_flags(*bridge_cmd, bridge.generate, false);
  bridge_cmd->add_option("--bridge-cmd", bridge.command, "Spawn the distribution server and talk over stdio");
  bridge_cmd->add_option("--bridge-host", bridge.host, "Connect to a distribution server over TCP");
  bridge_cmd->add_option("--bridge-port", bridge.port, "TCP port");
  bridge_cmd->add_option("--top-m", bridge.top_m, "Entries requested per distribution")->capture_default_str();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Lexicon attribute scores for JSONL text");
  score_cmd->add_option("--input", score.input, "Input JSONL")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--field", score.field, "Text field (falls back to \"text\")")->capture_default_str();
  score_cmd->add_option("--lexicons", score.lexicons, "Lexicon JSON (default: built-in)")->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score.out_path, "Output JSONL (default: stdout)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment: generation, decay, sweep, tradeoff, latency");
  bench_cmd->add_option("experiment", bench.experiment, "Experiment name")->required();
  bench_cmd->add_option("--data", bench.data_dir, "Corpus directory used to train desk models")->capture_default_str();
  bench_cmd->add_option("--prompts", bench.prompts, "Prompt JSONL (default: <data>/prompts.jsonl)");
  bench_cmd->add_option("--vocab", bench.vocab, "Vocabulary for pre-trained models")->check(CLI::ExistingFile);
  bench_cmd->add_option("--base-model", bench.base_model, "Pre-trained base model")->check(CLI::ExistingFile);
  bench_cmd->add_option("--expert-model", bench.expert_model, "Pre-trained expert model")->check(CLI::ExistingFile);
  bench_cmd->add_option("--reference-model", bench.reference_model, "Pre-trained reference model")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--lexicons", bench.lexicons, "Lexicon JSON (default: built-in)")->check(CLI::ExistingFile);
  bench_cmd->add_option("--out-dir", bench.out_dir, "Report directory")->capture_default_str();
  bench_cmd->add_option("--num-prompts", bench.num_prompts, "Prompts used (0 = all)")->capture_default_str();
  bench_cmd->add_flag("--all-prompts", bench.all_prompts, "Include non-challenging prompts");
  bench_cmd->add_option("--repetitions", bench.repetitions, "Generations per prompt")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->capture_default_str();
  bench_cmd->add_option("--latency-continuations", bench.latency_continuations, "Continuations timed per strategy")
      ->capture_default_str();
  bench_cmd->add_option("--lambdas", bench.lambdas, "Lambda grid for sweep/tradeoff")->delimiter(',');
  bench_cmd->add_option("--taus", bench.taus, "Tau grid for sweep")->delimiter(',');
  add_decoding_flags(*bench_cmd, bench.decoding);
  add_training_flags(*bench_cmd, bench.training);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*gen_cmd) return cmd_generate(gen);
    if (*bridge_cmd) return cmd_bridge_generate(bridge);
    if (*score_cmd) return cmd_score(score, out);
    if (*bench_cmd) return cmd_bench(bench, args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace detox::cli
