#pragma once

// Additive-smoothed n-gram language model:
//
//   p(t | ctx) = (count(ctx, t) + alpha) / (count(ctx, .) + alpha * |V|)
//
// V is the set of distinct training tokens plus <unk> (plus any declared
// vocabulary). Contexts are the last order-1 tokens of the history, left
// padded with <s>; <s> conditions but is never predicted.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pplcheck/backend.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/text.hpp"

namespace pplcheck {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr int kNgramFormatVersion = 1;

class NgramModel {
 public:
  using Context = std::vector<std::string>;
  using NextCounts = std::map<std::string, std::uint64_t, std::less<>>;
  using CountTable = std::map<Context, NextCounts>;

  NgramModel(int order, double alpha, std::set<std::string, std::less<>> vocab, CountTable counts)
      : order_(order), alpha_(alpha), vocab_(std::move(vocab)), counts_(std::move(counts)) {
    if (order_ < 1) fail(ErrorKind::Validation, "n-gram order must be >= 1");
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) fail(ErrorKind::Validation, "alpha must be > 0");
    vocab_.emplace(kUnkToken);
    for (const auto& [ctx, next] : counts_) {
      if (ctx.size() != static_cast<std::size_t>(order_ - 1)) {
        fail(ErrorKind::Validation, "context length does not match order");
      }
      std::uint64_t total = 0;
      for (const auto& [tok, c] : next) {
        if (!vocab_.contains(tok)) fail(ErrorKind::Validation, "count for token outside vocabulary: " + tok);
        total += c;
      }
      totals_.emplace(ctx, total);
    }
  }

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const std::set<std::string, std::less<>>& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const CountTable& counts() const { return counts_; }

  std::string map_token(std::string_view tok) const {
    return vocab_.contains(tok) ? std::string(tok) : std::string(kUnkToken);
  }

  // `context` must hold exactly order-1 (already mapped) tokens.
  double prob(std::span<const std::string> context, std::string_view token) const {
    const std::string mapped = map_token(token);
    const double denom_smooth = alpha_ * static_cast<double>(vocab_.size());
    const auto it = counts_.find(Context(context.begin(), context.end()));
    if (it == counts_.end()) return alpha_ / denom_smooth;
    const auto next = it->second.find(mapped);
    const double c = next == it->second.end() ? 0.0 : static_cast<double>(next->second);
    const double total = static_cast<double>(totals_.at(it->first));
    return (c + alpha_) / (total + denom_smooth);
  }

  // Context for the next prediction given a raw token history.
  Context context_of(std::span<const std::string> history) const {
    const std::size_t k = static_cast<std::size_t>(order_ - 1);
    Context ctx;
    ctx.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      // position relative to the end of the padded history
      const std::size_t from_end = k - i;
      if (from_end > history.size()) {
        ctx.emplace_back(kBosToken);
      } else {
        ctx.push_back(map_token(history[history.size() - from_end]));
      }
    }
    return ctx;
  }

  nlohmann::json to_json() const {
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [ctx, next] : counts_) {
      nlohmann::json n = nlohmann::json::object();
      for (const auto& [tok, c] : next) n[tok] = c;
      counts.push_back({{"context", ctx}, {"next", std::move(n)}});
    }
    return {{"format", "pplcheck-ngram"},
            {"version", kNgramFormatVersion},
            {"order", order_},
            {"alpha", alpha_},
            {"vocab", std::vector<std::string>(vocab_.begin(), vocab_.end())},
            {"counts", std::move(counts)}};
  }

  static NgramModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "pplcheck-ngram") fail(ErrorKind::Validation, "not an n-gram model file");
      if (j.at("version").get<int>() != kNgramFormatVersion) {
        fail(ErrorKind::Validation, "unsupported n-gram model version");
      }
      std::set<std::string, std::less<>> vocab;
      for (const auto& t : j.at("vocab")) vocab.insert(t.get<std::string>());
      CountTable counts;
      for (const auto& entry : j.at("counts")) {
        NextCounts next;
        for (const auto& [tok, c] : entry.at("next").items()) next.emplace(tok, c.get<std::uint64_t>());
        counts.emplace(entry.at("context").get<Context>(), std::move(next));
      }
      return NgramModel(j.at("order").get<int>(), j.at("alpha").get<double>(), std::move(vocab),
                        std::move(counts));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("malformed n-gram model: ") + e.what());
    }
  }

  bool operator==(const NgramModel& o) const {
    return order_ == o.order_ && alpha_ == o.alpha_ && vocab_ == o.vocab_ && counts_ == o.counts_;
  }

 private:
  int order_;
  double alpha_;
  std::set<std::string, std::less<>> vocab_;
  CountTable counts_;
  std::map<Context, std::uint64_t> totals_;
};

// Each inner vector is one sentence; every sentence is independently padded.
inline NgramModel train_ngram(const std::vector<std::vector<std::string>>& sentences, int order,
                              double alpha, const std::vector<std::string>& declared_vocab = {}) {
  if (order < 1) fail(ErrorKind::Validation, "n-gram order must be >= 1");
  if (!(alpha > 0.0)) fail(ErrorKind::Validation, "alpha must be > 0");
  const std::size_t k = static_cast<std::size_t>(order - 1);

  std::set<std::string, std::less<>> vocab(declared_vocab.begin(), declared_vocab.end());
  NgramModel::CountTable counts;
  for (const auto& sentence : sentences) {
    std::vector<std::string> padded(k, std::string(kBosToken));
    padded.insert(padded.end(), sentence.begin(), sentence.end());
    for (std::size_t i = k; i < padded.size(); ++i) {
      vocab.insert(padded[i]);
      NgramModel::Context ctx(padded.begin() + static_cast<std::ptrdiff_t>(i - k),
                              padded.begin() + static_cast<std::ptrdiff_t>(i));
      counts[std::move(ctx)][padded[i]] += 1;
    }
  }
  return NgramModel(order, alpha, std::move(vocab), std::move(counts));
}

// One sentence per line; lowercased and split on whitespace.
inline NgramModel train_ngram(std::istream& corpus, int order, double alpha,
                              const std::vector<std::string>& declared_vocab = {}) {
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(corpus, line)) {
    auto toks = tokenize_lower(line);
    if (!toks.empty()) sentences.push_back(std::move(toks));
  }
  return train_ngram(sentences, order, alpha, declared_vocab);
}

inline void save_ngram(const std::filesystem::path& path, const NgramModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << model.to_json().dump() << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

inline NgramModel load_ngram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open n-gram model " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, "malformed n-gram model " + path.string() + ": " + e.what());
  }
  return NgramModel::from_json(j);
}

// Causal-only backend over an immutable NgramModel.
class NgramBackend final : public LmBackend {
 public:
  explicit NgramBackend(std::shared_ptr<const NgramModel> model, std::string name = "ngram")
      : model_(std::move(model)), name_(std::move(name)) {}

  std::string backend_id() const override { return "ngram"; }
  std::string model_name() const override { return name_; }
  bool supports(ScoringMode mode) const override { return mode == ScoringMode::Causal; }
  std::string tokenizer_note() const override {
    return "lowercase+whitespace; context and target tokenized separately; order=" +
           std::to_string(model_->order()) + " alpha=" + nlohmann::json(model_->alpha()).dump();
  }

  const NgramModel& model() const { return *model_; }

  TokenLogProbs score(ScoringMode mode, std::string_view context,
                      std::string_view target) const override {
    if (mode != ScoringMode::Causal) {
      fail(ErrorKind::UnsupportedMode, "ngram backend does not support masked scoring");
    }
    std::vector<std::string> history = tokenize_lower(context);
    auto target_tokens = tokenize_lower(target);
    std::vector<double> logprobs;
    logprobs.reserve(target_tokens.size());
    for (const auto& tok : target_tokens) {
      const auto ctx = model_->context_of(history);
      logprobs.push_back(std::log(model_->prob(ctx, tok)));
      history.push_back(tok);
    }
    return TokenLogProbs(std::move(target_tokens), std::move(logprobs));
  }

 private:
  std::shared_ptr<const NgramModel> model_;
  std::string name_;
};

}  // namespace pplcheck
