#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "pplcheck/error.hpp"
#include "pplcheck/text.hpp"

namespace pplcheck {

enum class ScoringMode { Causal, Masked };

inline constexpr std::string_view to_string(ScoringMode mode) {
  return mode == ScoringMode::Causal ? "causal" : "masked";
}

inline ScoringMode parse_scoring_mode(std::string_view text) {
  const auto key = to_lower(trim(text));
  if (key == "causal") return ScoringMode::Causal;
  if (key == "masked") return ScoringMode::Masked;
  fail(ErrorKind::Validation, "unknown scoring mode '" + std::string(text) + "'");
}

// Natural-log probabilities of the target-region tokens, one per token.
class TokenLogProbs {
 public:
  TokenLogProbs() = default;

  TokenLogProbs(std::vector<std::string> tokens, std::vector<double> logprobs)
      : tokens_(std::move(tokens)), logprobs_(std::move(logprobs)) {
    if (tokens_.size() != logprobs_.size()) {
      fail(ErrorKind::Validation, "token/logprob length mismatch: " + std::to_string(tokens_.size()) +
                                      " vs " + std::to_string(logprobs_.size()));
    }
    for (double lp : logprobs_) {
      if (!(lp <= 0.0)) fail(ErrorKind::Validation, "log-probability must be <= 0, got " + std::to_string(lp));
    }
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<double>& logprobs() const { return logprobs_; }
  std::size_t token_count() const { return logprobs_.size(); }
  bool empty() const { return logprobs_.empty(); }
  double sum() const { return std::accumulate(logprobs_.begin(), logprobs_.end(), 0.0); }

  bool operator==(const TokenLogProbs&) const = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<double> logprobs_;
};

// Token log-probability provider. Implementations must be safe to call
// concurrently from multiple threads.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual std::string backend_id() const = 0;
  virtual std::string model_name() const = 0;
  virtual bool supports(ScoringMode mode) const = 0;
  // How context and target are joined/tokenized; recorded in provenance.
  virtual std::string tokenizer_note() const = 0;

  // Entry i is log p(target_i | ...); context tokens never contribute entries.
  virtual TokenLogProbs score(ScoringMode mode, std::string_view context,
                              std::string_view target) const = 0;
};

namespace detail {

inline TokenLogProbs checked_score(const LmBackend& backend, ScoringMode mode,
                                   std::string_view context, std::string_view target) {
  if (!backend.supports(mode)) {
    fail(ErrorKind::UnsupportedMode,
         backend.backend_id() + " backend does not support " + std::string(to_string(mode)) + " scoring");
  }
  if (trim(target).empty()) fail(ErrorKind::EmptyTarget, "target text is empty");
  auto result = backend.score(mode, context, target);
  if (result.empty()) fail(ErrorKind::EmptyTarget, "target tokenizes to zero tokens");
  return result;
}

}  // namespace detail

inline TokenLogProbs score_causal(const LmBackend& backend, std::string_view context,
                                  std::string_view target) {
  return detail::checked_score(backend, ScoringMode::Causal, context, target);
}

inline TokenLogProbs score_masked(const LmBackend& backend, std::string_view context,
                                  std::string_view target) {
  return detail::checked_score(backend, ScoringMode::Masked, context, target);
}

inline TokenLogProbs score_with(const LmBackend& backend, ScoringMode mode, std::string_view context,
                                std::string_view target) {
  return detail::checked_score(backend, mode, context, target);
}

}  // namespace pplcheck
