#pragma once

// Command-line front end. Exit codes: 0 ok, 2 validation, 3 I/O, 4 backend.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pplcheck/pplcheck.hpp"

namespace pplcheck::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;

struct NgramTrainArgs {
  std::string corpus;
  int order = 3;
  double alpha = 1.0;
  std::string vocab;
  std::string out;
};

struct ScoreArgs {
  std::string dataset;
  std::string backend;
  std::string model;
  std::string mode = "causal";
  bool no_evidence = false;
  std::string out;
  std::size_t jobs = 1;
  bool fail_fast = false;
  bool no_logprobs = false;
  int retries = 3;
  int retry_backoff_ms = 200;
  int timeout_ms = 120000;
};

struct RunArgs {
  std::string dataset;
  std::string scores;
  std::size_t shots = 2;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::string objective = "f1_macro";
  std::string search = "exact";
  bool stratified = false;
  std::string out;
  std::string csv;
};

struct BaselineArgs {
  std::string dataset;
  std::size_t shots = 2;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  bool stratified = false;
  std::string out;
  std::string csv;
};

struct RankArgs {
  std::string scores;
  std::size_t k_max = 0;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::string out;
};

struct NegateArgs {
  std::string dataset;
  std::string out;
  std::string mode = "first-match";
  std::string verb_lexicon;
  bool drop_skipped = false;
};

struct GapArgs {
  std::string scores;
  std::string out;
};

struct ConvertArgs {
  std::string input;
  std::string out;
  std::string name;
  std::optional<std::size_t> max_evidence_sentences;
  bool no_balance = false;
  std::uint64_t seed = 0;
};

struct ModelsArgs {
  std::string url;
};

namespace detail {

inline std::ifstream open_in(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, std::string("cannot open ") + what + " " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  return out;
}

inline ScoresFile load_scores(const std::string& path) {
  auto in = open_in(path, "scores file");
  return read_scores(in);
}

struct BackendSpec {
  std::string kind;  // ngram | remote
  std::string target;
};

inline BackendSpec parse_backend_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    fail(ErrorKind::Validation, "--backend must be ngram:PATH or remote:URL, got '" + spec + "'");
  }
  BackendSpec b{spec.substr(0, colon), spec.substr(colon + 1)};
  if ((b.kind != "ngram" && b.kind != "remote") || b.target.empty()) {
    fail(ErrorKind::Validation, "--backend must be ngram:PATH or remote:URL, got '" + spec + "'");
  }
  return b;
}

inline void write_text_or_stdout(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  auto f = open_out(path);
  f << text;
  if (!f) fail(ErrorKind::Io, "write failed for " + path);
}

}  // namespace detail

inline int cmd_ngram_train(const NgramTrainArgs& a, std::ostream& out) {
  auto corpus = detail::open_in(a.corpus, "corpus");
  std::vector<std::string> declared;
  if (!a.vocab.empty()) {
    auto vin = detail::open_in(a.vocab, "vocabulary");
    std::string line;
    while (std::getline(vin, line)) {
      for (auto& t : tokenize_lower(line)) declared.push_back(std::move(t));
    }
  }
  const auto model = train_ngram(corpus, a.order, a.alpha, declared);
  save_ngram(a.out, model);

  RunManifest m;
  m.command = "ngram-train";
  m.config = {{"corpus", a.corpus}, {"order", a.order}, {"alpha", a.alpha}, {"vocab", a.vocab}, {"out", a.out}};
  m.add_input(a.corpus);
  if (!a.vocab.empty()) m.add_input(a.vocab);
  m.notes = {{"vocab_size", model.vocab_size()}, {"contexts", model.counts().size()}};
  write_manifest(a.out, m);
  out << "trained order-" << a.order << " model, |V|=" << model.vocab_size() << " -> " << a.out << '\n';
  return kExitOk;
}

inline int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const auto spec = detail::parse_backend_spec(a.backend);
  const ScoringMode mode = parse_scoring_mode(a.mode);
  const Dataset ds = load_dataset(a.dataset);

  std::unique_ptr<LmBackend> backend;
  if (spec.kind == "ngram") {
    auto model = std::make_shared<const NgramModel>(load_ngram(spec.target));
    backend = std::make_unique<NgramBackend>(std::move(model),
                                             a.model.empty() ? fs::path(spec.target).stem().string() : a.model);
  } else {
    if (a.model.empty()) fail(ErrorKind::Validation, "--model is required for a remote backend");
    RemoteOptions opts;
    opts.base_url = spec.target;
    opts.model = a.model;
    opts.max_in_flight = std::max<std::size_t>(a.jobs, 1);
    opts.max_attempts = std::max(a.retries, 1);
    opts.backoff = std::chrono::milliseconds(a.retry_backoff_ms);
    opts.read_timeout = std::chrono::milliseconds(a.timeout_ms);
    auto remote = std::make_unique<RemoteBackend>(opts);
    bool served = false;
    for (const auto& m : remote->list_models()) served = served || m.id == a.model;
    if (!served) fail(ErrorKind::Validation, "model '" + a.model + "' is not served by " + spec.target);
    backend = std::move(remote);
  }
  if (!backend->supports(mode)) {
    fail(ErrorKind::UnsupportedMode,
         backend->backend_id() + " backend does not support " + std::string(to_string(mode)) + " scoring");
  }

  const bool conditioned = !a.no_evidence;
  auto run = score_dataset(*backend, ds, mode, conditioned, {.fail_fast = a.fail_fast, .jobs = a.jobs});

  ScoresFile file{make_provenance(*backend, mode, conditioned, sha256_file(a.dataset)), std::move(run.scores),
                  std::move(run.failures)};
  {
    auto f = detail::open_out(a.out);
    write_scores(f, file, !a.no_logprobs);
    if (!f) fail(ErrorKind::Io, "write failed for " + a.out);
  }

  RunManifest m;
  m.command = "score";
  m.config = {{"dataset", a.dataset}, {"backend", a.backend},         {"model", backend->model_name()},
              {"mode", a.mode},       {"conditioned", conditioned},   {"jobs", a.jobs},
              {"fail_fast", a.fail_fast}, {"out", a.out}};
  m.add_input(a.dataset);
  if (spec.kind == "ngram") m.add_input(spec.target);
  m.notes = {{"tokenizer_note", backend->tokenizer_note()},
             {"normalization", "per-token mean (exp of negative mean log-probability)"},
             {"provenance_hash", file.provenance.hash()},
             {"scored", file.scores.size()},
             {"failed", file.failures.size()}};
  write_manifest(a.out, m);

  bool backend_failure = false;
  for (const auto& f : file.failures) {
    err << "warning: " << f.message << '\n';
    backend_failure = backend_failure || exit_code(f.kind) == 4;
  }
  out << "scored " << file.scores.size() << "/" << ds.size() << " records -> " << a.out << '\n';
  return backend_failure ? 4 : kExitOk;
}

namespace detail {

// Dataset restricted to records that have scores, after checking that the
// scores were produced from this very dataset file.
inline std::pair<Dataset, ScoresFile> load_run_inputs(const std::string& dataset_path, const std::string& scores_path,
                                                      std::ostream& err) {
  Dataset ds = load_dataset(dataset_path);
  ScoresFile scores = load_scores(scores_path);
  if (scores.provenance.dataset_hash != sha256_file(dataset_path)) {
    fail(ErrorKind::Validation, "scores file " + scores_path + " was not produced from dataset " + dataset_path);
  }
  if (scores.scores.size() == ds.size()) return {std::move(ds), std::move(scores)};

  std::unordered_map<std::string, bool> scored;
  for (const auto& s : scores.scores) scored[s.id] = true;
  std::vector<ClaimRecord> kept;
  for (const auto& r : ds.records()) {
    if (scored.contains(r.id)) {
      kept.push_back(r);
    } else {
      err << "warning: record '" << r.id << "' has no score and is excluded\n";
    }
  }
  return {Dataset(ds.name(), std::move(kept)), std::move(scores)};
}

inline void emit_experiment(const ExperimentReport& rep, const std::string& json_path, const std::string& csv_path,
                            const RunManifest& manifest, std::ostream& out) {
  const std::string csv = csv_header() + "\n" + csv_row(rep) + "\n";
  if (!json_path.empty()) {
    write_text_or_stdout(json_path, to_json(rep).dump(2) + "\n", out);
    write_manifest(json_path, manifest);
  }
  if (!csv_path.empty()) {
    write_text_or_stdout(csv_path, csv, out);
    write_manifest(csv_path, manifest);
  }
  out << csv;
}

}  // namespace detail

inline int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  auto [ds, scores] = detail::load_run_inputs(a.dataset, a.scores, err);
  ExperimentConfig cfg;
  cfg.shots = a.shots;
  cfg.seeds = a.seeds;
  cfg.objective = parse_objective(a.objective);
  cfg.search = parse_search(a.search);
  cfg.stratified = a.stratified;
  const auto rep = run_experiment(ds, scores.scores, cfg, scores.provenance.model);

  RunManifest m;
  m.command = "run";
  m.config = {{"dataset", a.dataset},     {"scores", a.scores},
              {"shots", a.shots},         {"seeds", a.seeds},
              {"objective", a.objective}, {"search", cfg.search.describe()},
              {"stratified", a.stratified}};
  m.add_input(a.dataset);
  m.add_input(a.scores);
  m.notes = {{"provenance_hash", scores.provenance.hash()}, {"records", ds.size()}};
  detail::emit_experiment(rep, a.out, a.csv, m, out);
  return kExitOk;
}

inline int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.dataset);
  ExperimentConfig cfg;
  cfg.shots = a.shots;
  cfg.seeds = a.seeds;
  cfg.stratified = a.stratified;
  const auto rep = run_major_class(ds, cfg);

  RunManifest m;
  m.command = "baseline";
  m.config = {{"dataset", a.dataset}, {"shots", a.shots}, {"seeds", a.seeds}, {"stratified", a.stratified}};
  m.add_input(a.dataset);
  detail::emit_experiment(rep, a.out, a.csv, m, out);
  return kExitOk;
}

inline int cmd_rank(const RankArgs& a, std::ostream& out) {
  const auto scores = detail::load_scores(a.scores);
  const std::size_t k_max = a.k_max == 0 ? scores.scores.size() : a.k_max;
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= k_max; ++k) ks.push_back(k);
  if (k_max > scores.scores.size()) {
    fail(ErrorKind::Validation, "--k-max " + std::to_string(k_max) + " exceeds the " +
                                    std::to_string(scores.scores.size()) + " scored claims");
  }
  const auto rep = rank_claims(scores.scores, ks, a.trials, a.seed);
  std::ostringstream csv;
  write_ranking_csv(csv, rep);
  detail::write_text_or_stdout(a.out, csv.str(), out);
  if (!a.out.empty()) {
    RunManifest m;
    m.command = "rank";
    m.config = {{"scores", a.scores}, {"k_max", k_max}, {"trials", a.trials}, {"seed", a.seed}};
    m.add_input(a.scores);
    write_manifest(a.out, m);
  }
  return kExitOk;
}

inline int cmd_negate(const NegateArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.dataset);
  const VerbLexicon lexicon = a.verb_lexicon.empty() ? VerbLexicon::defaults() : VerbLexicon::load(a.verb_lexicon);
  NegationOptions opts;
  opts.mode = parse_negation_mode(a.mode);
  opts.keep_skipped = !a.drop_skipped;
  const auto result = negate_dataset(ds, lexicon, opts);
  save_dataset(a.out, result.dataset);

  nlohmann::json rules = nlohmann::json::object();
  for (const auto& r : result.results) {
    const std::string key(to_string(r.rule));
    rules[key] = rules.value(key, 0) + 1;
  }
  const nlohmann::json skip_report = {{"skipped_ids", result.skipped_ids}, {"rules", rules}};
  detail::write_text_or_stdout(a.out + ".skipped.json", skip_report.dump(2) + "\n", out);

  RunManifest m;
  m.command = "negate";
  m.config = {{"dataset", a.dataset}, {"out", a.out}, {"mode", a.mode}, {"verb_lexicon", a.verb_lexicon},
              {"keep_skipped", opts.keep_skipped}};
  m.add_input(a.dataset);
  if (!a.verb_lexicon.empty()) m.add_input(a.verb_lexicon);
  write_manifest(a.out, m);
  out << "negated " << (ds.size() - result.skipped_ids.size()) << "/" << ds.size() << " claims ("
      << result.skipped_ids.size() << " skipped) -> " << a.out << '\n';
  return kExitOk;
}

inline int cmd_gap(const GapArgs& a, std::ostream& out) {
  const auto scores = detail::load_scores(a.scores);
  const auto [orig, neg] = pair_negation_scores(scores.scores);
  const auto gap = ppl_gap_report(orig, neg);
  const nlohmann::json j = {{"pairs", gap.pairs}, {"mean_abs_diff", gap.mean_abs_diff}, {"max_abs_diff", gap.max_abs_diff}};
  detail::write_text_or_stdout(a.out, j.dump(2) + "\n", out);
  return kExitOk;
}

inline int cmd_convert(const ConvertArgs& a, bool fever, std::ostream& out) {
  auto in = detail::open_in(a.input, "input");
  const std::string name = a.name.empty() ? fs::path(a.out).stem().string() : a.name;
  Dataset ds;
  if (fever) {
    FeverConvertOptions opts;
    opts.max_evidence_sentences = a.max_evidence_sentences;
    opts.balance_unsupported = !a.no_balance;
    opts.seed = a.seed;
    ds = convert_fever(in, name, opts);
  } else {
    ds = convert_politifact(in, name);
  }
  save_dataset(a.out, ds);
  RunManifest m;
  m.command = fever ? "convert-fever" : "convert-politifact";
  m.config = {{"input", a.input}, {"out", a.out}, {"balance", !a.no_balance}, {"seed", a.seed}};
  if (a.max_evidence_sentences) m.config["max_evidence_sentences"] = *a.max_evidence_sentences;
  m.add_input(a.input);
  m.notes = {{"supported", ds.class_counts().supported}, {"unsupported", ds.class_counts().unsupported}};
  write_manifest(a.out, m);
  out << "wrote " << ds.size() << " records (" << ds.class_counts().supported << " supported, "
      << ds.class_counts().unsupported << " unsupported) -> " << a.out << '\n';
  return kExitOk;
}

inline int cmd_models(const ModelsArgs& a, std::ostream& out) {
  RemoteOptions opts;
  opts.base_url = a.url;
  const RemoteBackend remote(opts);
  for (const auto& m : remote.list_models()) {
    out << m.id;
    for (auto mode : m.modes) out << ' ' << to_string(mode);
    out << " window=" << m.context_window << '\n';
  }
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Evidence-conditioned perplexity fact-checking toolkit", "pplcheck"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file mirroring command-line flags");
  app.set_version_flag("--version", std::string(kToolVersion));

  NgramTrainArgs train;
  auto* c_train = app.add_subcommand("ngram-train", "Train an additive-smoothed n-gram model");
  c_train->add_option("--corpus", train.corpus, "Training text, one sentence per line")->required();
  c_train->add_option("--order", train.order, "n-gram order")->check(CLI::Range(1, 64))->capture_default_str();
  c_train->add_option("--alpha", train.alpha, "Additive smoothing constant")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--vocab", train.vocab, "Extra vocabulary file (whitespace separated tokens)");
  c_train->add_option("--out", train.out, "Model output path")->required();

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Score every claim of a dataset");
  c_score->add_option("--dataset", score.dataset, "Dataset JSONL")->required();
  c_score->add_option("--backend", score.backend, "ngram:MODEL_PATH or remote:URL")->required();
  c_score->add_option("--model", score.model, "Model id (required for remote backends)");
  c_score->add_option("--mode", score.mode, "causal or masked")
      ->check(CLI::IsMember({"causal", "masked"}))
      ->capture_default_str();
  c_score->add_flag("--no-evidence", score.no_evidence, "Score claims without the evidence prefix");
  c_score->add_option("--out", score.out, "Scores JSONL output")->required();
  c_score->add_option("--jobs", score.jobs, "Concurrent scoring requests")->check(CLI::Range(1, 1024));
  c_score->add_flag("--fail-fast", score.fail_fast, "Abort on the first failing record");
  c_score->add_flag("--no-logprobs", score.no_logprobs, "Omit per-token log-probabilities from the output");
  c_score->add_option("--retries", score.retries, "Attempts per remote request")->check(CLI::Range(1, 100));
  c_score->add_option("--retry-backoff-ms", score.retry_backoff_ms, "Initial retry backoff")
      ->check(CLI::NonNegativeNumber);
  c_score->add_option("--timeout-ms", score.timeout_ms, "Remote read timeout")->check(CLI::PositiveNumber);

  RunArgs runa;
  auto* c_run = app.add_subcommand("run", "Few-shot threshold experiment over cached scores");
  c_run->add_option("--dataset", runa.dataset, "Dataset JSONL the scores were produced from")->required();
  c_run->add_option("--scores", runa.scores, "Scores JSONL")->required();
  c_run->add_option("--shots", runa.shots, "Shot count n")->check(CLI::PositiveNumber)->capture_default_str();
  c_run->add_option("--seeds", runa.seeds, "Comma separated seeds")->delimiter(',')->capture_default_str();
  c_run->add_option("--objective", runa.objective, "f1_macro or accuracy")
      ->check(CLI::IsMember({"f1_macro", "accuracy"}))
      ->capture_default_str();
  c_run->add_option("--search", runa.search, "exact or grid:LO:HI:STEP")->capture_default_str();
  c_run->add_flag("--stratified", runa.stratified, "Force both classes into the shot set when n >= 2");
  c_run->add_option("--out", runa.out, "JSON report path");
  c_run->add_option("--csv", runa.csv, "CSV table row path");

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "Major-class baseline under the same few-shot protocol");
  c_base->add_option("--dataset", base.dataset, "Dataset JSONL")->required();
  c_base->add_option("--shots", base.shots, "Shot count n")->check(CLI::PositiveNumber)->capture_default_str();
  c_base->add_option("--seeds", base.seeds, "Comma separated seeds")->delimiter(',')->capture_default_str();
  c_base->add_flag("--stratified", base.stratified, "Force both classes into the shot set when n >= 2");
  c_base->add_option("--out", base.out, "JSON report path");
  c_base->add_option("--csv", base.csv, "CSV table row path");

  RankArgs rank;
  auto* c_rank = app.add_subcommand("rank", "Precision@k of perplexity ranking vs random ranking");
  c_rank->add_option("--scores", rank.scores, "Scores JSONL")->required();
  c_rank->add_option("--k-max", rank.k_max, "Largest k (default: all claims)");
  c_rank->add_option("--trials", rank.trials, "Random-baseline trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_rank->add_option("--seed", rank.seed, "Random-baseline seed")->capture_default_str();
  c_rank->add_option("--out", rank.out, "CSV output (default: stdout)");

  NegateArgs neg;
  auto* c_neg = app.add_subcommand("negate", "Augment a dataset with template-negated claims");
  c_neg->add_option("--dataset", neg.dataset, "Dataset JSONL")->required();
  c_neg->add_option("--out", neg.out, "Augmented dataset output")->required();
  c_neg->add_option("--mode", neg.mode, "first-match or all-match")
      ->check(CLI::IsMember({"first-match", "all-match"}))
      ->capture_default_str();
  c_neg->add_option("--verb-lexicon", neg.verb_lexicon, "Verb word list for do-support");
  c_neg->add_flag("--drop-skipped", neg.drop_skipped, "Drop claims that could not be negated");

  GapArgs gap;
  auto* c_gap = app.add_subcommand("gap", "Perplexity gap between original and negated claims");
  c_gap->add_option("--scores", gap.scores, "Scores JSONL of a negation-augmented dataset")->required();
  c_gap->add_option("--out", gap.out, "JSON output (default: stdout)");

  ConvertArgs fever;
  auto* c_fever = app.add_subcommand("convert-fever", "Convert a FEVER-style JSONL export");
  c_fever->add_option("--input", fever.input, "FEVER-style JSONL")->required();
  c_fever->add_option("--out", fever.out, "Dataset output")->required();
  c_fever->add_option("--name", fever.name, "Dataset name");
  c_fever->add_option("--max-evidence-sentences", fever.max_evidence_sentences, "Evidence sentences to keep");
  c_fever->add_flag("--no-balance", fever.no_balance, "Keep all REFUTES / NOT ENOUGH INFO records");
  c_fever->add_option("--seed", fever.seed, "Balancing seed")->capture_default_str();

  ConvertArgs politi;
  auto* c_politi = app.add_subcommand("convert-politifact", "Convert a Politifact-style JSONL export");
  c_politi->add_option("--input", politi.input, "Politifact-style JSONL")->required();
  c_politi->add_option("--out", politi.out, "Dataset output")->required();
  c_politi->add_option("--name", politi.name, "Dataset name");

  ModelsArgs models;
  auto* c_models = app.add_subcommand("models", "List models served by a remote backend");
  c_models->add_option("--url", models.url, "Backend base URL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (c_train->parsed()) return cmd_ngram_train(train, out);
    if (c_score->parsed()) return cmd_score(score, out, err);
    if (c_run->parsed()) return cmd_run(runa, out, err);
    if (c_base->parsed()) return cmd_baseline(base, out);
    if (c_rank->parsed()) return cmd_rank(rank, out);
    if (c_neg->parsed()) return cmd_negate(neg, out);
    if (c_gap->parsed()) return cmd_gap(gap, out);
    if (c_fever->parsed()) return cmd_convert(fever, true, out);
    if (c_politi->parsed()) return cmd_convert(politi, false, out);
    if (c_models->parsed()) return cmd_models(models, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return exit_code(ErrorKind::Io);
  }
  return kExitValidation;
}

}  // namespace pplcheck::cli
