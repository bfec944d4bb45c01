#pragma once

// Few-shot protocol: per seed, split -> fit on shots -> predict on the rest,
// then aggregate mean and sample standard deviation across seeds.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pplcheck/backend.hpp"
#include "pplcheck/classify.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/metrics.hpp"
#include "pplcheck/scoring.hpp"
#include "pplcheck/split.hpp"

namespace pplcheck {

inline const std::vector<std::uint64_t> kDefaultSeeds = {13, 42, 2020};

struct ExperimentConfig {
  std::size_t shots = 2;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  Objective objective = Objective::F1Macro;
  ThresholdSearch search = ThresholdSearch::exact();
  bool stratified = false;
};

struct SeedResult {
  FewShotSplit split;
  std::optional<ThresholdClassifier> classifier;  // absent for the major-class baseline
  std::optional<Label> majority;
  EvalReport report;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation; 0 for a single seed
};

inline MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct ExperimentReport {
  std::string dataset;
  std::string model;
  std::string method;  // "perplexity" or "major_class"
  std::string mode;    // scoring mode, empty for the baseline
  std::optional<bool> conditioned;
  ExperimentConfig config;
  std::vector<SeedResult> per_seed;
  MetricSummary accuracy;
  MetricSummary f1_macro;
  MetricSummary f1_supported;
  MetricSummary f1_unsupported;
};

namespace detail {

inline void aggregate(ExperimentReport& rep) {
  std::vector<double> acc, f1, f1s, f1u;
  for (const auto& r : rep.per_seed) {
    acc.push_back(r.report.accuracy);
    f1.push_back(r.report.f1_macro);
    f1s.push_back(r.report.supported.f1);
    f1u.push_back(r.report.unsupported.f1);
  }
  rep.accuracy = summarize(acc);
  rep.f1_macro = summarize(f1);
  rep.f1_supported = summarize(f1s);
  rep.f1_unsupported = summarize(f1u);
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace detail

// `scores` must contain one entry per dataset record (matched by id).
inline ExperimentReport run_experiment(const Dataset& ds, std::span<const ScoredClaim> scores,
                                       const ExperimentConfig& cfg, std::string model = {}) {
  if (cfg.seeds.empty()) fail(ErrorKind::Validation, "at least one seed is required");
  std::unordered_map<std::string, const ScoredClaim*> by_id;
  for (const auto& s : scores) by_id.emplace(s.id, &s);
  std::vector<const ScoredClaim*> aligned;
  aligned.reserve(ds.size());
  for (const auto& rec : ds.records()) {
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) fail(ErrorKind::Validation, "no score for record '" + rec.id + "'");
    if (it->second->label != rec.label) {
      fail(ErrorKind::Validation, "label of score '" + rec.id + "' disagrees with the dataset");
    }
    aligned.push_back(it->second);
  }

  ExperimentReport rep;
  rep.dataset = ds.name();
  rep.model = std::move(model);
  rep.method = "perplexity";
  rep.config = cfg;
  if (!aligned.empty()) {
    rep.mode = std::string(to_string(aligned.front()->mode));
    rep.conditioned = aligned.front()->conditioned;
  }

  for (const auto seed : cfg.seeds) {
    SeedResult result;
    result.split = make_split(ds, cfg.shots, seed, cfg.stratified);
    std::vector<ScoredClaim> shots;
    shots.reserve(cfg.shots);
    for (auto p : result.split.shot_positions) shots.push_back(*aligned[p]);
    result.classifier = fit_threshold(shots, cfg.objective, cfg.search, seed);

    Confusion conf;
    for (auto p : result.split.test_positions) {
      conf.at(aligned[p]->label, predict(*result.classifier, *aligned[p])) += 1;
    }
    result.report = evaluate(conf);
    result.report.seed = seed;
    result.report.n = cfg.shots;
    rep.per_seed.push_back(std::move(result));
  }
  detail::aggregate(rep);
  return rep;
}

// Scores every record once (scoring does not depend on the split), then runs
// the protocol. Any scoring failure aborts.
inline ExperimentReport run_experiment(const Dataset& ds, const LmBackend& backend, ScoringMode mode,
                                       bool conditioned, const ExperimentConfig& cfg) {
  auto run = score_dataset(backend, ds, mode, conditioned, {.fail_fast = true});
  return run_experiment(ds, run.scores, cfg, backend.model_name());
}

inline ExperimentReport run_major_class(const Dataset& ds, const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) fail(ErrorKind::Validation, "at least one seed is required");
  ExperimentReport rep;
  rep.dataset = ds.name();
  rep.model = "major_class";
  rep.method = "major_class";
  rep.config = cfg;
  for (const auto seed : cfg.seeds) {
    SeedResult result;
    result.split = make_split(ds, cfg.shots, seed, cfg.stratified);
    std::vector<Label> shot_labels;
    for (auto p : result.split.shot_positions) shot_labels.push_back(ds[p].label);
    const auto baseline = fit_major_class(std::span<const Label>(shot_labels));
    result.majority = baseline.majority;
    Confusion conf;
    for (auto p : result.split.test_positions) conf.at(ds[p].label, baseline.predict()) += 1;
    result.report = evaluate(conf);
    result.report.seed = seed;
    result.report.n = cfg.shots;
    rep.per_seed.push_back(std::move(result));
  }
  detail::aggregate(rep);
  return rep;
}

inline nlohmann::json table_row(const ExperimentReport& rep) {
  nlohmann::json row = {{"dataset", rep.dataset},
                        {"model", rep.model},
                        {"method", rep.method},
                        {"n", rep.config.shots},
                        {"seeds", rep.config.seeds},
                        {"objective", to_string(rep.config.objective)},
                        {"search", rep.config.search.describe()},
                        {"acc_mean", rep.accuracy.mean},
                        {"acc_std", rep.accuracy.stddev},
                        {"f1_mean", rep.f1_macro.mean},
                        {"f1_std", rep.f1_macro.stddev}};
  if (!rep.mode.empty()) row["mode"] = rep.mode;
  if (rep.conditioned) row["conditioned"] = *rep.conditioned;
  return row;
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : rep.per_seed) {
    nlohmann::json j = {{"seed", r.split.seed},
                        {"shot_ids", r.split.shot_ids},
                        {"test_size", r.split.test_ids.size()},
                        {"report", to_json(r.report)}};
    if (r.classifier) j["classifier"] = to_json(*r.classifier);
    if (r.majority) j["majority"] = to_string(*r.majority);
    seeds.push_back(std::move(j));
  }
  auto summary = [](const MetricSummary& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.stddev}}; };
  return {{"row", table_row(rep)},
          {"stratified", rep.config.stratified},
          {"aggregate",
           {{"accuracy", summary(rep.accuracy)},
            {"f1_macro", summary(rep.f1_macro)},
            {"f1_supported", summary(rep.f1_supported)},
            {"f1_unsupported", summary(rep.f1_unsupported)}}},
          {"per_seed", std::move(seeds)}};
}

inline std::string csv_header() {
  return "dataset,model,method,mode,conditioned,n,seeds,objective,search,acc_mean,acc_std,f1_mean,f1_std";
}

inline std::string csv_row(const ExperimentReport& rep) {
  std::string seeds;
  for (std::size_t i = 0; i < rep.config.seeds.size(); ++i) {
    if (i) seeds.push_back(' ');
    seeds += std::to_string(rep.config.seeds[i]);
  }
  std::ostringstream out;
  out << detail::csv_field(rep.dataset) << ',' << detail::csv_field(rep.model) << ',' << rep.method << ','
      << rep.mode << ',' << (rep.conditioned ? (*rep.conditioned ? "true" : "false") : "") << ','
      << rep.config.shots << ',' << seeds << ',' << to_string(rep.config.objective) << ','
      << rep.config.search.describe() << ',' << detail::fixed6(rep.accuracy.mean) << ','
      << detail::fixed6(rep.accuracy.stddev) << ',' << detail::fixed6(rep.f1_macro.mean) << ','
      << detail::fixed6(rep.f1_macro.stddev);
  return out.str();
}

}  // namespace pplcheck
