#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "json.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"

namespace pplcheck {

struct Prediction {
  Label predicted;
  Label gold;
};

// counts[gold][predicted], indexed by index_of(Label).
struct Confusion {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t& at(Label gold, Label predicted) { return counts[index_of(gold)][index_of(predicted)]; }
  std::size_t at(Label gold, Label predicted) const { return counts[index_of(gold)][index_of(predicted)]; }
  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::size_t correct() const { return counts[0][0] + counts[1][1]; }
  bool operator==(const Confusion&) const = default;
};

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  ClassStats supported;
  ClassStats unsupported;
  Confusion confusion;
  std::optional<std::uint64_t> seed;
  std::size_t n = 0;  // shot count the report was produced with

  const ClassStats& per_class(Label label) const {
    return label == Label::Supported ? supported : unsupported;
  }
};

namespace detail {

inline double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline ClassStats class_stats(const Confusion& c, Label label) {
  const Label other = flip(label);
  const std::size_t tp = c.at(label, label);
  const std::size_t fp = c.at(other, label);
  const std::size_t fn = c.at(label, other);
  ClassStats s;
  s.precision = safe_ratio(tp, tp + fp);
  s.recall = safe_ratio(tp, tp + fn);
  s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  s.support = tp + fn;
  return s;
}

}  // namespace detail

// Zero denominators yield 0 for precision, recall, and F1.
inline EvalReport evaluate(const Confusion& confusion) {
  if (confusion.total() == 0) fail(ErrorKind::Validation, "cannot evaluate an empty prediction set");
  EvalReport r;
  r.confusion = confusion;
  r.accuracy = detail::safe_ratio(confusion.correct(), confusion.total());
  r.supported = detail::class_stats(confusion, Label::Supported);
  r.unsupported = detail::class_stats(confusion, Label::Unsupported);
  r.f1_macro = 0.5 * (r.supported.f1 + r.unsupported.f1);
  return r;
}

inline EvalReport evaluate(std::span<const Prediction> predictions) {
  Confusion c;
  for (const auto& p : predictions) c.at(p.gold, p.predicted) += 1;
  return evaluate(c);
}

inline nlohmann::json to_json(const ClassStats& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {
      {"accuracy", r.accuracy},
      {"f1_macro", r.f1_macro},
      {"per_class", {{"SUPPORTED", to_json(r.supported)}, {"UNSUPPORTED", to_json(r.unsupported)}}},
      // rows: gold, columns: predicted; order SUPPORTED, UNSUPPORTED
      {"confusion", r.confusion.counts},
      {"n", r.n},
  };
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

}  // namespace pplcheck
