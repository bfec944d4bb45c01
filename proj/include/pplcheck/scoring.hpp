#pragma once

// Evidence-conditioned perplexity. For a claim with C tokens scored after
// the evidence prefix,
//
//   PPL = exp(-(1/C) * sum_i log p(claim_i | evidence, claim_<i))
//
// which equals the C-th root of prod 1/p_i. Evidence tokens condition the
// scores but contribute no terms. Masked (pseudo-perplexity) scores use the
// same per-token mean so both modes share units.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <cstdlib>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pplcheck/backend.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/hash.hpp"

namespace pplcheck {

inline constexpr std::string_view kNormalization = "mean";

inline double perplexity_from_logprobs(std::span<const double> logprobs) {
  if (logprobs.empty()) fail(ErrorKind::EmptyTarget, "perplexity of an empty target is undefined");
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

inline double perplexity_from_logprobs(const TokenLogProbs& lp) {
  return perplexity_from_logprobs(std::span<const double>(lp.logprobs()));
}

// Hash of everything that defines the score space: scores with different
// hashes must never share a threshold.
inline std::string provenance_hash(std::string_view backend, std::string_view model, ScoringMode mode,
                                   bool conditioned, std::string_view tokenizer_note) {
  const nlohmann::json canon = {{"backend", backend},
                                {"model", model},
                                {"mode", to_string(mode)},
                                {"conditioned", conditioned},
                                {"normalization", kNormalization},
                                {"tokenizer_note", tokenizer_note}};
  return sha256_hex(canon.dump());
}

inline std::string provenance_hash(const LmBackend& backend, ScoringMode mode, bool conditioned) {
  return provenance_hash(backend.backend_id(), backend.model_name(), mode, conditioned,
                         backend.tokenizer_note());
}

struct ScoredClaim {
  std::string id;
  Label label = Label::Unsupported;
  ScoringMode mode = ScoringMode::Causal;
  bool conditioned = true;
  // Conditioned scoring was requested but the record had no evidence.
  bool evidence_missing = false;
  TokenLogProbs token_logprobs;  // may be empty when loaded without logprobs
  std::size_t claim_tokens = 0;  // C
  double perplexity = 0.0;
  std::string provenance;

  bool operator==(const ScoredClaim&) const = default;
};

inline ScoredClaim score_claim(const LmBackend& backend, const ClaimRecord& record, ScoringMode mode,
                               bool conditioned) {
  ScoredClaim out;
  out.id = record.id;
  out.label = record.label;
  out.mode = mode;
  out.conditioned = conditioned;
  out.provenance = provenance_hash(backend, mode, conditioned);

  const bool use_evidence = conditioned && !trim(record.evidence).empty();
  out.evidence_missing = conditioned && !use_evidence;
  try {
    if (trim(record.claim).empty()) fail(ErrorKind::EmptyTarget, "claim is empty");
    out.token_logprobs = score_with(backend, mode, use_evidence ? std::string_view(record.evidence) : "",
                                    record.claim);
  } catch (const Error& e) {
    throw Error(e.kind(), "record '" + record.id + "': " + e.what(), e.retry_after());
  }
  out.claim_tokens = out.token_logprobs.token_count();
  out.perplexity = perplexity_from_logprobs(out.token_logprobs);
  return out;
}

struct ScoreFailure {
  std::string id;
  std::size_t index = 0;  // position in the dataset
  ErrorKind kind = ErrorKind::Validation;
  std::string message;

  bool operator==(const ScoreFailure&) const = default;
};

struct ScoreOptions {
  bool fail_fast = false;
  std::size_t jobs = 1;
};

struct ScoreRun {
  std::vector<ScoredClaim> scores;  // dataset order, failures omitted
  std::vector<ScoreFailure> failures;
};

inline ScoreRun score_dataset(const LmBackend& backend, const Dataset& ds, ScoringMode mode,
                              bool conditioned, const ScoreOptions& opts = {}) {
  const std::size_t n = ds.size();
  std::vector<std::optional<ScoredClaim>> slots(n);
  std::vector<std::optional<Error>> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i] = score_claim(backend, ds[i], mode, conditioned);
      } catch (const Error& e) {
        errors[i] = e;
        if (opts.fail_fast) abort.store(true);
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  ScoreRun run;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      if (opts.fail_fast) throw *errors[i];
      run.failures.push_back({ds[i].id, i, errors[i]->kind(), errors[i]->what()});
    } else if (slots[i]) {
      run.scores.push_back(std::move(*slots[i]));
    }
  }
  return run;
}

// Header line of a scores file.
struct Provenance {
  std::string backend;
  std::string model;
  ScoringMode mode = ScoringMode::Causal;
  bool conditioned = true;
  std::string normalization{kNormalization};
  std::string tokenizer_note;
  std::string dataset_hash;
  std::string created_at;

  std::string hash() const { return provenance_hash(backend, model, mode, conditioned, tokenizer_note); }
  bool operator==(const Provenance&) const = default;
};

// ISO-8601 UTC. Honours SOURCE_DATE_EPOCH so that outputs can be made
// byte-reproducible.
inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Provenance make_provenance(const LmBackend& backend, ScoringMode mode, bool conditioned,
                                  std::string dataset_hash) {
  return {backend.backend_id(), backend.model_name(), mode,           conditioned,
          std::string(kNormalization), backend.tokenizer_note(), std::move(dataset_hash),
          utc_timestamp()};
}

struct ScoresFile {
  Provenance provenance;
  std::vector<ScoredClaim> scores;
  std::vector<ScoreFailure> failures;
};

inline void write_scores(std::ostream& out, const ScoresFile& file, bool include_logprobs = true) {
  const auto& p = file.provenance;
  const nlohmann::json header = {{"type", "header"},
                                 {"backend", p.backend},
                                 {"model", p.model},
                                 {"mode", to_string(p.mode)},
                                 {"conditioned", p.conditioned},
                                 {"normalization", p.normalization},
                                 {"tokenizer_note", p.tokenizer_note},
                                 {"dataset_hash", p.dataset_hash},
                                 {"created_at", p.created_at},
                                 {"provenance_hash", p.hash()}};
  out << header.dump() << '\n';
  for (const auto& s : file.scores) {
    nlohmann::json j = {{"id", s.id},
                        {"label", to_string(s.label)},
                        {"perplexity", s.perplexity},
                        {"C", s.claim_tokens},
                        {"mode", to_string(s.mode)},
                        {"conditioned", s.conditioned}};
    if (s.evidence_missing) j["evidence_missing"] = true;
    if (include_logprobs && !s.token_logprobs.empty()) {
      j["tokens"] = s.token_logprobs.tokens();
      j["logprobs"] = s.token_logprobs.logprobs();
    }
    out << j.dump() << '\n';
  }
  for (const auto& f : file.failures) {
    out << nlohmann::json{{"id", f.id}, {"index", f.index}, {"kind", to_string(f.kind)}, {"error", f.message}}
               .dump()
        << '\n';
  }
}

namespace detail {

inline ErrorKind parse_error_kind(std::string_view s) {
  for (auto k : {ErrorKind::Validation, ErrorKind::Parse, ErrorKind::Io, ErrorKind::UnsupportedMode,
                 ErrorKind::EmptyTarget, ErrorKind::BackendUnavailable, ErrorKind::Backend}) {
    if (s == to_string(k)) return k;
  }
  return ErrorKind::Validation;
}

}  // namespace detail

// Validates the header's provenance hash and every record against it.
inline ScoresFile read_scores(std::istream& in) {
  ScoresFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::string expected_hash;
  auto where = [&] { return "scores line " + std::to_string(line_no) + ": "; };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Parse, where() + "malformed JSON (" + e.what() + ")");
    }
    try {
      if (!have_header) {
        if (j.value("type", "") != "header") fail(ErrorKind::Parse, where() + "missing provenance header");
        auto& p = file.provenance;
        p.backend = j.at("backend").get<std::string>();
        p.model = j.at("model").get<std::string>();
        p.mode = parse_scoring_mode(j.at("mode").get<std::string>());
        p.conditioned = j.at("conditioned").get<bool>();
        p.normalization = j.at("normalization").get<std::string>();
        p.tokenizer_note = j.at("tokenizer_note").get<std::string>();
        p.dataset_hash = j.at("dataset_hash").get<std::string>();
        p.created_at = j.at("created_at").get<std::string>();
        if (p.normalization != kNormalization) {
          fail(ErrorKind::Validation, where() + "unsupported normalization '" + p.normalization + "'");
        }
        expected_hash = p.hash();
        if (j.at("provenance_hash").get<std::string>() != expected_hash) {
          fail(ErrorKind::Validation, where() + "provenance hash does not match header fields");
        }
        have_header = true;
        continue;
      }
      if (j.contains("error")) {
        file.failures.push_back({j.at("id").get<std::string>(), j.value("index", std::size_t{0}),
                                 detail::parse_error_kind(j.value("kind", "validation")),
                                 j.at("error").get<std::string>()});
        continue;
      }
      ScoredClaim s;
      s.id = j.at("id").get<std::string>();
      s.label = parse_label(j.at("label").get<std::string>());
      s.perplexity = j.at("perplexity").get<double>();
      s.claim_tokens = j.at("C").get<std::size_t>();
      s.mode = parse_scoring_mode(j.at("mode").get<std::string>());
      s.conditioned = j.at("conditioned").get<bool>();
      s.evidence_missing = j.value("evidence_missing", false);
      s.provenance = expected_hash;
      if (s.mode != file.provenance.mode || s.conditioned != file.provenance.conditioned) {
        fail(ErrorKind::Validation, where() + "record mode/conditioning disagrees with header");
      }
      if (!(s.perplexity > 0.0) || s.claim_tokens == 0) {
        fail(ErrorKind::Validation, where() + "perplexity must be > 0 and C >= 1");
      }
      if (j.contains("logprobs")) {
        s.token_logprobs = TokenLogProbs(j.value("tokens", std::vector<std::string>(s.claim_tokens)),
                                         j.at("logprobs").get<std::vector<double>>());
        if (s.token_logprobs.token_count() != s.claim_tokens) {
          fail(ErrorKind::Validation, where() + "C does not match logprobs length");
        }
        const double recomputed = perplexity_from_logprobs(s.token_logprobs);
        if (std::abs(recomputed - s.perplexity) > 1e-9 * std::max(1.0, s.perplexity)) {
          fail(ErrorKind::Validation, where() + "perplexity inconsistent with logprobs");
        }
      }
      file.scores.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, where() + e.what());
    }
  }
  if (!have_header) fail(ErrorKind::Parse, "scores file is empty (no provenance header)");
  return file;
}

}  // namespace pplcheck
