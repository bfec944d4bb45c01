#pragma once

// Claim/evidence records, the native JSONL dataset format, and the label
// mappings for FEVER-style and Politifact-style sources.

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/text.hpp"

namespace pplcheck {

enum class Label { Supported = 0, Unsupported = 1 };

inline constexpr std::array<Label, 2> kLabels = {Label::Supported, Label::Unsupported};

inline constexpr std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

inline constexpr std::string_view to_string(Label label) {
  return label == Label::Supported ? "SUPPORTED" : "UNSUPPORTED";
}

inline constexpr Label flip(Label label) {
  return label == Label::Supported ? Label::Unsupported : Label::Supported;
}

inline Label parse_label(std::string_view text) {
  const auto key = normalize_key(text);
  if (key == "SUPPORTED") return Label::Supported;
  if (key == "UNSUPPORTED") return Label::Unsupported;
  fail(ErrorKind::Validation, "unknown label '" + std::string(text) + "'");
}

struct ClaimRecord {
  std::string id;
  std::string claim;
  std::string evidence;
  Label label = Label::Unsupported;
  std::optional<std::string> source_label;

  bool operator==(const ClaimRecord&) const = default;
};

struct ClassCounts {
  std::size_t supported = 0;
  std::size_t unsupported = 0;

  std::size_t operator[](Label label) const {
    return label == Label::Supported ? supported : unsupported;
  }
  std::size_t total() const { return supported + unsupported; }
  bool operator==(const ClassCounts&) const = default;
};

// Ordered, immutable collection of records with unique ids. Claim text is
// not checked here; empty claims are rejected per record at scoring time.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::string name, std::vector<ClaimRecord> records)
      : name_(std::move(name)), records_(std::move(records)) {
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& rec = records_[i];
      if (!index_.emplace(rec.id, i).second) {
        fail(ErrorKind::Validation, "duplicate record id '" + rec.id + "'");
      }
      (rec.label == Label::Supported ? counts_.supported : counts_.unsupported) += 1;
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<ClaimRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ClassCounts& class_counts() const { return counts_; }
  const ClaimRecord& operator[](std::size_t i) const { return records_[i]; }

  const ClaimRecord* find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  std::optional<std::size_t> position(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Dataset& other) const {
    return name_ == other.name_ && records_ == other.records_;
  }

 private:
  std::string name_;
  std::vector<ClaimRecord> records_;
  ClassCounts counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline nlohmann::json to_json(const ClaimRecord& rec) {
  nlohmann::json j = {
      {"id", rec.id},
      {"claim", rec.claim},
      {"evidence", rec.evidence},
      {"label", to_string(rec.label)},
  };
  if (rec.source_label) j["source_label"] = *rec.source_label;
  return j;
}

namespace detail {

inline std::string require_string(const nlohmann::json& j, const char* field, std::size_t line_no) {
  const auto it = j.find(field);
  if (it == j.end()) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": missing field '" + field + "'");
  }
  if (!it->is_string()) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": field '" + field + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace detail

inline ClaimRecord parse_record_line(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected a JSON object");

  ClaimRecord rec;
  rec.id = detail::require_string(j, "id", line_no);
  rec.claim = detail::require_string(j, "claim", line_no);
  rec.evidence = detail::require_string(j, "evidence", line_no);
  const auto label = detail::require_string(j, "label", line_no);
  try {
    rec.label = parse_label(label);
  } catch (const Error& e) {
    fail(ErrorKind::Validation, "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (const auto it = j.find("source_label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": field 'source_label' must be a string");
    }
    rec.source_label = it->get<std::string>();
  }
  return rec;
}

// Blank lines are skipped; line numbers in errors are 1-based physical lines.
inline Dataset parse_dataset(std::istream& in, std::string name) {
  std::vector<ClaimRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    records.push_back(parse_record_line(line, line_no));
  }
  return Dataset(std::move(name), std::move(records));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open dataset " + path.string());
  return parse_dataset(in, path.stem().string());
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& rec : ds.records()) out << to_json(rec).dump() << '\n';
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  write_dataset(out, ds);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// FEVER: SUPPORTS -> Supported; REFUTES and NOT ENOUGH INFO -> Unsupported.
inline Label map_fever_label(std::string_view source) {
  const auto key = normalize_key(source);
  if (key == "SUPPORTS") return Label::Supported;
  if (key == "REFUTES" || key == "NOT ENOUGH INFO") return Label::Unsupported;
  fail(ErrorKind::Validation, "unknown FEVER label '" + std::string(source) + "'");
}

// Politifact six-way scale: the three lowest ratings are Unsupported.
inline Label map_politifact_label(std::string_view source) {
  const auto key = normalize_key(source);
  if (key == "PANTS-FIRE" || key == "FALSE" || key == "BARELY-TRUE") return Label::Unsupported;
  if (key == "HALF-TRUE" || key == "MOSTLY-TRUE" || key == "TRUE") return Label::Supported;
  fail(ErrorKind::Validation, "unknown Politifact label '" + std::string(source) + "'");
}

}  // namespace pplcheck
