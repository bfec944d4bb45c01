#pragma once

// Single-parameter threshold classifier over perplexity:
//   perplexity <  th -> Supported
//   perplexity >= th -> Unsupported

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/metrics.hpp"
#include "pplcheck/scoring.hpp"

namespace pplcheck {

enum class Objective { F1Macro, Accuracy };

inline std::string_view to_string(Objective o) { return o == Objective::F1Macro ? "f1_macro" : "accuracy"; }

inline Objective parse_objective(std::string_view s) {
  const auto key = to_lower(trim(s));
  if (key == "f1_macro" || key == "f1-macro" || key == "f1") return Objective::F1Macro;
  if (key == "accuracy" || key == "acc") return Objective::Accuracy;
  fail(ErrorKind::Validation, "unknown objective '" + std::string(s) + "'");
}

inline double objective_value(const EvalReport& r, Objective o) {
  return o == Objective::F1Macro ? r.f1_macro : r.accuracy;
}

struct ThresholdSearch {
  enum class Kind { Exact, Grid };
  Kind kind = Kind::Exact;
  double lo = 0.0;
  double hi = 1000.0;
  double step = 1.0;

  static ThresholdSearch exact() { return {}; }
  static ThresholdSearch grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) fail(ErrorKind::Validation, "grid search needs lo <= hi and step > 0");
    return {Kind::Grid, lo, hi, step};
  }
  // Integer grid over 0..1000.
  static ThresholdSearch default_grid() { return grid(0.0, 1000.0, 1.0); }

  std::string describe() const {
    if (kind == Kind::Exact) return "exact";
    auto num = [](double v) {
      auto s = nlohmann::json(v).dump();
      if (s.ends_with(".0")) s.resize(s.size() - 2);
      return s;
    };
    return "grid:" + num(lo) + ":" + num(hi) + ":" + num(step);
  }
};

// "exact" or "grid:LO:HI:STEP" ("grid" alone is 0:1000:1).
inline ThresholdSearch parse_search(std::string_view s) {
  const auto key = to_lower(trim(s));
  if (key == "exact") return ThresholdSearch::exact();
  if (key == "grid") return ThresholdSearch::default_grid();
  const auto parts = split(key, ':');
  if (parts.size() == 4 && parts[0] == "grid") {
    try {
      return ThresholdSearch::grid(std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3]));
    } catch (const std::logic_error&) {
    }
  }
  fail(ErrorKind::Validation, "unknown search mode '" + std::string(s) + "' (expected exact or grid:LO:HI:STEP)");
}

struct FitReport {
  double objective_value = 0.0;
  double secondary_value = 0.0;
  std::size_t shot_size = 0;
  std::size_t candidates = 0;
  std::optional<std::uint64_t> seed;
};

struct ThresholdClassifier {
  double th = 0.0;
  Objective objective = Objective::F1Macro;
  ThresholdSearch search;
  FitReport fit_report;
  std::string provenance;

  Label predict(double perplexity) const { return perplexity < th ? Label::Supported : Label::Unsupported; }
};

namespace detail {

inline double sentinel_epsilon(double score) { return 1e-6 * std::max(1.0, std::abs(score)); }

struct Candidate {
  double th;
  std::size_t supported_count;  // number of sorted shots predicted Supported
};

// Better = higher objective, then higher secondary metric. Equal on both
// keeps the earlier (smaller) threshold.
inline bool improves(const EvalReport& cand, const EvalReport& best, Objective o) {
  constexpr double kTol = 1e-12;
  const Objective secondary = o == Objective::F1Macro ? Objective::Accuracy : Objective::F1Macro;
  const double d1 = objective_value(cand, o) - objective_value(best, o);
  if (d1 > kTol) return true;
  if (d1 < -kTol) return false;
  return objective_value(cand, secondary) - objective_value(best, secondary) > kTol;
}

inline void check_shots(std::span<const ScoredClaim> shots) {
  if (shots.empty()) fail(ErrorKind::Validation, "threshold fitting needs at least one shot");
  for (const auto& s : shots) {
    if (s.provenance != shots.front().provenance) {
      fail(ErrorKind::Validation, "shots mix scores with different provenance");
    }
    if (!std::isfinite(s.perplexity)) fail(ErrorKind::Validation, "non-finite perplexity for '" + s.id + "'");
  }
}

}  // namespace detail

// Exact search: candidates are midpoints between consecutive distinct shot
// perplexities plus one sentinel below the minimum and one above the
// maximum; any other threshold reproduces one of these partitions. A single
// ascending sweep updates the confusion matrix, so fitting is O(n log n).
inline ThresholdClassifier fit_threshold(std::span<const ScoredClaim> shots, Objective objective,
                                         const ThresholdSearch& search = ThresholdSearch::exact(),
                                         std::optional<std::uint64_t> seed = std::nullopt) {
  detail::check_shots(shots);

  std::vector<std::pair<double, Label>> sorted;
  sorted.reserve(shots.size());
  for (const auto& s : shots) sorted.emplace_back(s.perplexity, s.label);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<detail::Candidate> candidates;
  if (search.kind == ThresholdSearch::Kind::Exact) {
    const double lowest = sorted.front().first;
    double below = lowest - detail::sentinel_epsilon(lowest);
    if (below <= 0.0) below = lowest / 2.0;
    candidates.push_back({below, 0});
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const bool last_of_group = i + 1 == sorted.size() || sorted[i + 1].first != sorted[i].first;
      if (!last_of_group) continue;
      if (i + 1 == sorted.size()) {
        candidates.push_back({sorted[i].first + detail::sentinel_epsilon(sorted[i].first), i + 1});
      } else {
        double mid = sorted[i].first + (sorted[i + 1].first - sorted[i].first) / 2.0;
        if (!(mid > sorted[i].first)) mid = sorted[i + 1].first;  // adjacent doubles
        candidates.push_back({mid, i + 1});
      }
    }
  } else {
    const auto steps = static_cast<std::size_t>(std::floor((search.hi - search.lo) / search.step + 1e-9));
    for (std::size_t i = 0; i <= steps; ++i) {
      const double th = search.lo + static_cast<double>(i) * search.step;
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), th,
                                       [](const auto& p, double v) { return p.first < v; });
      candidates.push_back({th, static_cast<std::size_t>(it - sorted.begin())});
    }
  }

  // Start from "everything Unsupported" and move shots across as the
  // Supported prefix grows.
  Confusion conf;
  for (const auto& [ppl, gold] : sorted) conf.at(gold, Label::Unsupported) += 1;
  std::size_t moved = 0;

  std::optional<EvalReport> best;
  double best_th = 0.0;
  for (const auto& cand : candidates) {
    while (moved < cand.supported_count) {
      const Label gold = sorted[moved].second;
      conf.at(gold, Label::Unsupported) -= 1;
      conf.at(gold, Label::Supported) += 1;
      ++moved;
    }
    const auto report = evaluate(conf);
    if (!best || detail::improves(report, *best, objective)) {
      best = report;
      best_th = cand.th;
    }
  }

  ThresholdClassifier clf;
  clf.th = best_th;
  clf.objective = objective;
  clf.search = search;
  clf.provenance = shots.front().provenance;
  clf.fit_report.objective_value = objective_value(*best, objective);
  clf.fit_report.secondary_value =
      objective_value(*best, objective == Objective::F1Macro ? Objective::Accuracy : Objective::F1Macro);
  clf.fit_report.shot_size = shots.size();
  clf.fit_report.candidates = candidates.size();
  clf.fit_report.seed = seed;
  return clf;
}

inline Label predict(const ThresholdClassifier& clf, const ScoredClaim& scored) {
  if (scored.provenance != clf.provenance) {
    fail(ErrorKind::Validation, "score for '" + scored.id + "' comes from a different score space than the classifier");
  }
  return clf.predict(scored.perplexity);
}

inline nlohmann::json to_json(const ThresholdClassifier& clf) {
  nlohmann::json report = {{"objective_value", clf.fit_report.objective_value},
                           {"secondary_value", clf.fit_report.secondary_value},
                           {"shot_size", clf.fit_report.shot_size},
                           {"candidates", clf.fit_report.candidates}};
  if (clf.fit_report.seed) report["seed"] = *clf.fit_report.seed;
  return {{"th", clf.th},
          {"objective", to_string(clf.objective)},
          {"search", clf.search.describe()},
          {"fit_report", std::move(report)},
          {"provenance_hash", clf.provenance}};
}

inline ThresholdClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    ThresholdClassifier clf;
    clf.th = j.at("th").get<double>();
    clf.objective = parse_objective(j.at("objective").get<std::string>());
    clf.search = parse_search(j.at("search").get<std::string>());
    const auto& r = j.at("fit_report");
    clf.fit_report.objective_value = r.at("objective_value").get<double>();
    clf.fit_report.secondary_value = r.value("secondary_value", 0.0);
    clf.fit_report.shot_size = r.at("shot_size").get<std::size_t>();
    clf.fit_report.candidates = r.value("candidates", std::size_t{0});
    if (r.contains("seed")) clf.fit_report.seed = r["seed"].get<std::uint64_t>();
    clf.provenance = j.at("provenance_hash").get<std::string>();
    return clf;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed classifier: ") + e.what());
  }
}

struct MajorClassBaseline {
  Label majority = Label::Unsupported;
  Label predict() const { return majority; }
};

// Ties go to Unsupported.
inline MajorClassBaseline fit_major_class(std::span<const Label> shot_labels) {
  if (shot_labels.empty()) fail(ErrorKind::Validation, "major-class baseline needs at least one shot");
  const auto supported = std::count(shot_labels.begin(), shot_labels.end(), Label::Supported);
  const auto unsupported = static_cast<std::ptrdiff_t>(shot_labels.size()) - supported;
  return {supported > unsupported ? Label::Supported : Label::Unsupported};
}

inline MajorClassBaseline fit_major_class(std::span<const ClaimRecord> shots) {
  std::vector<Label> labels;
  labels.reserve(shots.size());
  for (const auto& r : shots) labels.push_back(r.label);
  return fit_major_class(std::span<const Label>(labels));
}

}  // namespace pplcheck
