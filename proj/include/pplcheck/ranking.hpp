#pragma once

// Triage ranking: claims sorted by descending perplexity (ties by id
// ascending); P@k is the fraction of Unsupported claims among the top k. The
// baseline ranks by seeded uniform random scores and averages P@k over trials.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/random.hpp"
#include "pplcheck/scoring.hpp"

namespace pplcheck {

struct RankingReport {
  std::vector<std::size_t> ks;
  std::vector<double> precision_at_k;
  std::vector<double> baseline_precision_at_k;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> ranked_ids;
};

namespace detail {

struct RankItem {
  double score;
  const std::string* id;
  Label label;
};

inline void sort_ranked(std::vector<RankItem>& items) {
  std::sort(items.begin(), items.end(), [](const RankItem& a, const RankItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return *a.id < *b.id;
  });
}

// Adds P@k for every k to `acc`.
inline void accumulate_precision(const std::vector<RankItem>& ranked, std::span<const std::size_t> ks,
                                 std::vector<double>& acc) {
  std::vector<std::size_t> prefix(ranked.size() + 1, 0);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    prefix[i + 1] = prefix[i] + (ranked[i].label == Label::Unsupported ? 1 : 0);
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    acc[i] += static_cast<double>(prefix[ks[i]]) / static_cast<double>(ks[i]);
  }
}

}  // namespace detail

inline RankingReport rank_claims(std::span<const ScoredClaim> scored, std::span<const std::size_t> ks,
                                 std::size_t baseline_trials = 10, std::uint64_t seed = 0) {
  if (baseline_trials < 1) fail(ErrorKind::Validation, "baseline trials must be >= 1");
  for (auto k : ks) {
    if (k < 1 || k > scored.size()) {
      fail(ErrorKind::Validation, "k=" + std::to_string(k) + " outside [1, " + std::to_string(scored.size()) + "]");
    }
  }

  RankingReport rep;
  rep.ks.assign(ks.begin(), ks.end());
  rep.trials = baseline_trials;
  rep.seed = seed;

  std::vector<detail::RankItem> items;
  items.reserve(scored.size());
  for (const auto& s : scored) items.push_back({s.perplexity, &s.id, s.label});
  detail::sort_ranked(items);
  for (const auto& it : items) rep.ranked_ids.push_back(*it.id);
  rep.precision_at_k.assign(ks.size(), 0.0);
  detail::accumulate_precision(items, ks, rep.precision_at_k);

  rep.baseline_precision_at_k.assign(ks.size(), 0.0);
  SplitMix64 rng(seed);
  for (std::size_t t = 0; t < baseline_trials; ++t) {
    for (auto& it : items) it.score = rng.next_double();
    detail::sort_ranked(items);
    detail::accumulate_precision(items, ks, rep.baseline_precision_at_k);
  }
  for (auto& v : rep.baseline_precision_at_k) v /= static_cast<double>(baseline_trials);
  return rep;
}

inline void write_ranking_csv(std::ostream& out, const RankingReport& rep) {
  out << "k,p_at_k,baseline_p_at_k\n";
  char buf[96];
  for (std::size_t i = 0; i < rep.ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", rep.ks[i], rep.precision_at_k[i],
                  rep.baseline_precision_at_k[i]);
    out << buf;
  }
}

}  // namespace pplcheck
