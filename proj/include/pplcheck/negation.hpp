#pragma once

// Template-based negation. The first auxiliary in the claim is negated
// ("is" -> "is not", "can" -> "cannot", "will" -> "will not") or, if it is
// already negated, restored to its positive form. Claims without an auxiliary
// fall back to do-support on the first lexicon verb ending in "s"
// ("helps" -> "does not help"). Anything else is left alone and reported as
// skipped.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pplcheck/core_data.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/scoring.hpp"
#include "pplcheck/text.hpp"

namespace pplcheck {

enum class NegationRule { AuxNegate, AuxDenegate, DoSupport, Skipped };

inline constexpr std::string_view to_string(NegationRule r) {
  switch (r) {
    case NegationRule::AuxNegate: return "aux_negate";
    case NegationRule::AuxDenegate: return "aux_denegate";
    case NegationRule::DoSupport: return "do_support";
    case NegationRule::Skipped: return "skipped";
  }
  return "skipped";
}

enum class NegationMode { FirstMatch, AllMatch };

inline NegationMode parse_negation_mode(std::string_view s) {
  const auto key = to_lower(trim(s));
  if (key == "first-match" || key == "first") return NegationMode::FirstMatch;
  if (key == "all-match" || key == "all") return NegationMode::AllMatch;
  fail(ErrorKind::Validation, "unknown negation mode '" + std::string(s) + "'");
}

inline constexpr std::array<std::string_view, 19> kPositiveAuxiliaries = {
    "is",     "are", "was", "were", "can", "could", "will", "would", "shall", "should",
    "may",    "might", "must", "do", "does", "did", "has", "have", "had"};

inline constexpr std::array<std::string_view, 220> kDefaultVerbForms = {
    "accelerates", "accepts", "achieves", "adds", "affects", "aggravates",
    "allows", "alters", "appears", "applies", "argues", "arrives",
    "attacks", "avoids", "becomes", "begins", "believes", "belongs",
    "benefits", "binds", "blocks", "boosts", "brings", "builds",
    "buys", "carries", "catches", "causes", "changes", "checks",
    "cleans", "clears", "comes", "compares", "complicates", "concerns",
    "confirms", "consists", "contains", "contaminates", "continues", "contributes",
    "controls", "costs", "covers", "creates", "cures", "cuts",
    "damages", "decreases", "defeats", "defends", "delays", "depends",
    "describes", "destroys", "detects", "develops", "dies", "differs",
    "dilutes", "disappears", "disinfects", "dissolves", "doubles", "drinks",
    "drives", "eats", "eliminates", "emerges", "enables", "encourages",
    "ends", "enhances", "ensures", "enters", "equals", "eradicates",
    "escapes", "exists", "expands", "explains", "exposes", "falls",
    "feeds", "feels", "fights", "fixes", "flows", "focuses focus",
    "follows", "forces", "forms", "gets", "gives", "goes",
    "grows", "guarantees", "happens", "harms", "heals", "hears",
    "heats", "helps", "hides", "hits", "holds", "hurts",
    "identifies", "ignores", "implies", "improves", "increases", "indicates",
    "infects", "influences", "inhibits", "injures", "kills", "knows",
    "lasts", "leads", "learns", "leaves", "lets", "limits",
    "lives", "looks", "loses", "lowers", "makes", "matters",
    "means", "meets", "mimics", "moves", "multiplies", "mutates",
    "needs", "neutralizes", "occurs", "offers", "opens", "originates",
    "passes", "pays", "penetrates", "permits", "persists", "plays",
    "poisons", "predicts", "prevents", "produces", "prolongs", "promotes",
    "protects", "proves", "provides", "pushes", "raises", "reaches",
    "reacts", "receives", "recovers", "reduces", "regulates", "relieves",
    "remains", "removes", "replaces", "replicates", "represents", "requires",
    "resists", "responds", "restores", "returns", "reveals", "rises",
    "risks", "runs", "saves", "says", "seems", "sends",
    "shows", "shrinks", "slows", "spreads", "starts", "stays",
    "stimulates", "stops", "strengthens", "suffers", "suppresses", "survives",
    "takes", "targets", "teaches", "tells", "tests", "thinks",
    "threatens", "transfers", "transmits", "travels", "treats", "triggers",
    "turns", "understands", "uses", "waits", "wants", "washes",
    "weakens", "wins", "worsens", "writes",
};

// Base form for a third-person singular verb. Handles -ies, the sibilant
// -es endings and -oes; everything else drops the final "s".
inline std::string stem_third_person(std::string_view form) {
  auto ends = [&](std::string_view suf) { return form.size() > suf.size() && form.ends_with(suf); };
  if (form.size() > 4 && form.ends_with("ies")) return std::string(form.substr(0, form.size() - 3)) + "y";
  for (std::string_view suf : {"sses", "shes", "ches", "xes", "zzes", "oes"}) {
    if (ends(suf)) return std::string(form.substr(0, form.size() - 2));
  }
  if (ends("s")) return std::string(form.substr(0, form.size() - 1));
  return std::string(form);
}

class VerbLexicon {
 public:
  VerbLexicon() = default;

  void add(std::string_view form, std::optional<std::string_view> stem = std::nullopt) {
    const auto f = to_lower(form);
    const auto s = stem ? to_lower(*stem) : stem_third_person(f);
    stems_[f] = s;
  }

  static const VerbLexicon& defaults() {
    static const VerbLexicon lex = [] {
      VerbLexicon l;
      for (auto entry : kDefaultVerbForms) l.add_entry(entry);
      return l;
    }();
    return lex;
  }

  // Word list format: one form per line, optional base form as a second
  // column, '#' comments.
  static VerbLexicon parse(std::istream& in) {
    VerbLexicon l;
    std::string line;
    while (std::getline(in, line)) {
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      l.add_entry(t);
    }
    return l;
  }

  static VerbLexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open verb lexicon " + path.string());
    return parse(in);
  }

  bool contains(std::string_view form) const { return stems_.contains(to_lower(form)); }

  std::optional<std::string> stem(std::string_view form) const {
    const auto it = stems_.find(to_lower(form));
    if (it == stems_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return stems_.size(); }
  const std::map<std::string, std::string>& entries() const { return stems_; }

 private:
  void add_entry(std::string_view entry) {
    const auto cols = split_whitespace(entry);
    if (cols.empty()) return;
    if (cols.size() > 1) {
      add(cols[0], std::string_view(cols[1]));
    } else {
      add(cols[0]);
    }
  }

  std::map<std::string, std::string> stems_;  // form -> stem
};

struct NegatedText {
  std::string text;
  NegationRule rule = NegationRule::Skipped;
};

namespace detail {

struct WordSpan {
  std::size_t begin;
  std::size_t end;
  std::string key;  // lowercased, typographic apostrophe folded to '
};

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' || c >= 0x80;
}

inline std::vector<WordSpan> word_spans(std::string_view s) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size()) {
      const auto c = static_cast<unsigned char>(s[j]);
      if (is_word_byte(c)) {
        ++j;
      } else if (c == '-' && j + 1 < s.size() && is_word_byte(static_cast<unsigned char>(s[j + 1]))) {
        ++j;
      } else {
        break;
      }
    }
    std::string key = to_lower(s.substr(i, j - i));
    for (std::size_t p; (p = key.find("\xE2\x80\x99")) != std::string::npos;) key.replace(p, 3, "'");
    // Trailing quote characters are punctuation, not part of the word.
    while (!key.empty() && key.back() == '\'' && !key.ends_with("n't")) key.pop_back();
    out.push_back({i, j, std::move(key)});
    i = j;
  }
  return out;
}

inline bool is_positive_aux(std::string_view w) {
  return std::find(kPositiveAuxiliaries.begin(), kPositiveAuxiliaries.end(), w) != kPositiveAuxiliaries.end();
}

// Positive form of a single-word negation (cannot, isn't, won't, ...).
inline std::optional<std::string> single_word_positive(std::string_view w) {
  if (w == "cannot" || w == "can't") return "can";
  if (w == "won't") return "will";
  if (w == "shan't") return "shall";
  if (w.ends_with("n't")) {
    const auto base = w.substr(0, w.size() - 3);
    if (base != "can" && base != "will" && base != "shall" && is_positive_aux(base)) return std::string(base);
  }
  return std::nullopt;
}

inline std::string negate_aux(std::string_view aux) {
  if (aux == "can") return "cannot";
  return std::string(aux) + " not";
}

inline std::string match_case(std::string replacement, std::string_view original) {
  if (!original.empty() && !replacement.empty() && original[0] >= 'A' && original[0] <= 'Z') {
    replacement[0] = ascii_upper(replacement[0]);
  }
  return replacement;
}

struct Edit {
  std::size_t begin;
  std::size_t end;
  std::string replacement;
  NegationRule rule;
};

// Auxiliary edit starting at word i, if any; `consumed` receives the number
// of words covered.
inline std::optional<Edit> aux_edit(std::string_view text, const std::vector<WordSpan>& words, std::size_t i,
                                    std::size_t& consumed) {
  const auto& w = words[i];
  const std::string_view original = text.substr(w.begin, w.end - w.begin);
  if (auto positive = single_word_positive(w.key)) {
    consumed = 1;
    return Edit{w.begin, w.end, match_case(*positive, original), NegationRule::AuxDenegate};
  }
  if (!is_positive_aux(w.key)) return std::nullopt;
  if (i + 1 < words.size() && words[i + 1].key == "not") {
    consumed = 2;
    return Edit{w.begin, words[i + 1].end, match_case(w.key, original), NegationRule::AuxDenegate};
  }
  consumed = 1;
  return Edit{w.begin, w.end, match_case(negate_aux(w.key), original), NegationRule::AuxNegate};
}

inline std::string apply_edits(std::string_view text, const std::vector<Edit>& edits) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    out.append(text.substr(pos, e.begin - pos));
    out += e.replacement;
    pos = e.end;
  }
  out.append(text.substr(pos));
  return out;
}

}  // namespace detail

inline NegatedText negate_claim(std::string_view claim, const VerbLexicon& lexicon = VerbLexicon::defaults(),
                                NegationMode mode = NegationMode::FirstMatch) {
  const auto words = detail::word_spans(claim);
  std::vector<detail::Edit> edits;
  for (std::size_t i = 0; i < words.size();) {
    std::size_t consumed = 1;
    if (auto e = detail::aux_edit(claim, words, i, consumed)) {
      edits.push_back(std::move(*e));
      if (mode == NegationMode::FirstMatch) break;
    }
    i += consumed;
  }

  if (edits.empty()) {
    for (const auto& w : words) {
      if (w.key.size() < 2 || w.key.back() != 's') continue;
      const auto stem = lexicon.stem(w.key);
      if (!stem) continue;
      const auto original = claim.substr(w.begin, w.end - w.begin);
      edits.push_back({w.begin, w.end, detail::match_case("does not " + *stem, original), NegationRule::DoSupport});
      break;
    }
  }

  if (edits.empty()) return {std::string(claim), NegationRule::Skipped};
  return {detail::apply_edits(claim, edits), edits.front().rule};
}

struct NegationResult {
  ClaimRecord original;
  std::string negated_claim;
  Label negated_label = Label::Supported;
  NegationRule rule = NegationRule::Skipped;
};

inline NegationResult negate_record(const ClaimRecord& rec, const VerbLexicon& lexicon = VerbLexicon::defaults(),
                                    NegationMode mode = NegationMode::FirstMatch) {
  auto negated = negate_claim(rec.claim, lexicon, mode);
  const bool skipped = negated.rule == NegationRule::Skipped;
  return {rec, std::move(negated.text), skipped ? rec.label : flip(rec.label), negated.rule};
}

inline constexpr std::string_view kNegatedSuffix = "::neg";

struct NegationOptions {
  NegationMode mode = NegationMode::FirstMatch;
  // Keep originals that could not be negated in the augmented dataset.
  bool keep_skipped = true;
};

struct NegatedDataset {
  Dataset dataset;
  std::vector<std::string> skipped_ids;
  std::vector<NegationResult> results;
};

// Each negated record directly follows its original, with id suffix "::neg",
// the flipped label and the same evidence.
inline NegatedDataset negate_dataset(const Dataset& ds, const VerbLexicon& lexicon = VerbLexicon::defaults(),
                                     const NegationOptions& opts = {}) {
  NegatedDataset out;
  std::vector<ClaimRecord> records;
  for (const auto& rec : ds.records()) {
    auto result = negate_record(rec, lexicon, opts.mode);
    if (result.rule == NegationRule::Skipped) {
      out.skipped_ids.push_back(rec.id);
      if (opts.keep_skipped) records.push_back(rec);
    } else {
      records.push_back(rec);
      records.push_back({rec.id + std::string(kNegatedSuffix), result.negated_claim, rec.evidence,
                         result.negated_label, std::nullopt});
    }
    out.results.push_back(std::move(result));
  }
  out.dataset = Dataset(ds.name(), std::move(records));
  return out;
}

struct PplGap {
  double mean_abs_diff = 0.0;
  double max_abs_diff = 0.0;
  std::size_t pairs = 0;
};

// Pairs original id X with negated id X::neg (or X itself when the negated
// list carries the original ids).
inline PplGap ppl_gap_report(std::span<const ScoredClaim> original, std::span<const ScoredClaim> negated) {
  std::unordered_map<std::string, const ScoredClaim*> by_id;
  for (const auto& s : original) by_id.emplace(s.id, &s);
  if (original.size() != negated.size()) {
    fail(ErrorKind::Validation, "unpaired scores: " + std::to_string(original.size()) + " originals vs " +
                                    std::to_string(negated.size()) + " negations");
  }
  if (negated.empty()) fail(ErrorKind::Validation, "no score pairs");
  PplGap gap;
  std::unordered_map<std::string, bool> used;
  for (const auto& n : negated) {
    std::string base = n.id;
    if (base.ends_with(kNegatedSuffix)) base.resize(base.size() - kNegatedSuffix.size());
    const auto it = by_id.find(base);
    if (it == by_id.end() || used[base]) fail(ErrorKind::Validation, "unpaired id '" + n.id + "'");
    used[base] = true;
    const double d = std::abs(it->second->perplexity - n.perplexity);
    gap.mean_abs_diff += d;
    gap.max_abs_diff = std::max(gap.max_abs_diff, d);
    ++gap.pairs;
  }
  gap.mean_abs_diff /= static_cast<double>(gap.pairs);
  return gap;
}

// Splits an augmented scores list into aligned (original, negated) lists,
// keeping only originals that have a "::neg" partner.
inline std::pair<std::vector<ScoredClaim>, std::vector<ScoredClaim>> pair_negation_scores(
    std::span<const ScoredClaim> scores) {
  std::unordered_map<std::string, const ScoredClaim*> by_id;
  for (const auto& s : scores) by_id.emplace(s.id, &s);
  std::pair<std::vector<ScoredClaim>, std::vector<ScoredClaim>> out;
  for (const auto& s : scores) {
    if (s.id.ends_with(kNegatedSuffix)) continue;
    const auto it = by_id.find(s.id + std::string(kNegatedSuffix));
    if (it == by_id.end()) continue;
    out.first.push_back(s);
    out.second.push_back(*it->second);
  }
  return out;
}

}  // namespace pplcheck
