#pragma once

// Converters from FEVER-style and Politifact-style JSONL exports into the
// native dataset format.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pplcheck/core_data.hpp"
#include "pplcheck/random.hpp"

namespace pplcheck {

struct FeverConvertOptions {
  // Keep at most this many evidence sentences (in document order).
  std::optional<std::size_t> max_evidence_sentences;
  // Sample equal numbers of REFUTES and NOT ENOUGH INFO records.
  bool balance_unsupported = true;
  std::uint64_t seed = 0;
};

namespace detail {

struct SourceRow {
  std::string id;
  std::string claim;
  std::vector<std::string> evidence;
  std::string source_label;
};

inline std::string json_id(const nlohmann::json& v, std::size_t line_no) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": 'id' must be a string or integer");
}

// Evidence may be a single string or an array of sentence strings.
inline std::vector<std::string> json_evidence(const nlohmann::json& j, std::size_t line_no) {
  std::vector<std::string> out;
  for (const char* field : {"evidence", "justification"}) {
    const auto it = j.find(field);
    if (it == j.end() || it->is_null()) continue;
    if (it->is_string()) {
      out.push_back(it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& s : *it) {
        if (!s.is_string()) {
          fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": evidence entries must be strings");
        }
        out.push_back(s.get<std::string>());
      }
    } else {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unsupported evidence type");
    }
    break;
  }
  return out;
}

inline std::vector<SourceRow> read_source_rows(std::istream& in) {
  std::vector<SourceRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("claim") || !j.contains("label")) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected object with id, claim, label");
    }
    SourceRow row;
    row.id = json_id(j["id"], line_no);
    row.claim = detail::require_string(j, "claim", line_no);
    row.source_label = detail::require_string(j, "label", line_no);
    row.evidence = json_evidence(j, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string join_evidence(const std::vector<std::string>& sentences,
                                 std::optional<std::size_t> max_sentences) {
  std::string out;
  const std::size_t limit = max_sentences.value_or(sentences.size());
  for (std::size_t i = 0; i < sentences.size() && i < limit; ++i) {
    const auto s = trim(sentences[i]);
    if (s.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

// Seeded choice of k positions out of `positions`, returned in original order.
inline std::vector<std::size_t> sample_in_order(const std::vector<std::size_t>& positions,
                                                std::size_t k, std::uint64_t seed) {
  const auto perm = seeded_permutation(positions.size(), seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t i = 0; i < k; ++i) chosen.push_back(positions[perm[i]]);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace detail

inline Dataset convert_fever(std::istream& in, std::string name, const FeverConvertOptions& opts = {}) {
  const auto rows = detail::read_source_rows(in);

  std::vector<std::size_t> refutes, nei;
  std::vector<Label> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels[i] = map_fever_label(rows[i].source_label);
    const auto key = normalize_key(rows[i].source_label);
    if (key == "REFUTES") refutes.push_back(i);
    if (key == "NOT ENOUGH INFO") nei.push_back(i);
  }

  std::vector<bool> keep(rows.size(), true);
  if (opts.balance_unsupported) {
    const std::size_t k = std::min(refutes.size(), nei.size());
    for (auto i : refutes) keep[i] = false;
    for (auto i : nei) keep[i] = false;
    for (auto i : detail::sample_in_order(refutes, k, opts.seed)) keep[i] = true;
    for (auto i : detail::sample_in_order(nei, k, opts.seed ^ 0x5bd1e995ULL)) keep[i] = true;
  }

  std::vector<ClaimRecord> records;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!keep[i]) continue;
    records.push_back({rows[i].id, rows[i].claim,
                       detail::join_evidence(rows[i].evidence, opts.max_evidence_sentences), labels[i],
                       normalize_key(rows[i].source_label)});
  }
  return Dataset(std::move(name), std::move(records));
}

inline Dataset convert_politifact(std::istream& in, std::string name) {
  std::vector<ClaimRecord> records;
  for (auto& row : detail::read_source_rows(in)) {
    const Label label = map_politifact_label(row.source_label);
    records.push_back({std::move(row.id), std::move(row.claim),
                       detail::join_evidence(row.evidence, std::nullopt), label,
                       to_lower(trim(row.source_label))});
  }
  return Dataset(std::move(name), std::move(records));
}

}  // namespace pplcheck
