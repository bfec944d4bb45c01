#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "json.hpp"
#include "pplcheck/error.hpp"
#include "pplcheck/hash.hpp"
#include "pplcheck/scoring.hpp"

namespace pplcheck {

inline constexpr std::string_view kToolVersion = "0.3.0";

// Written next to every artifact a command produces, as <artifact>.manifest.json.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_hashes;  // path -> sha256
  std::string tool_version{kToolVersion};
  std::string timestamp = utc_timestamp();
  nlohmann::json notes = nlohmann::json::object();

  void add_input(const std::filesystem::path& path) { input_hashes[path.string()] = sha256_file(path); }

  nlohmann::json to_json() const {
    return {{"command", command},     {"config", config},       {"inputs", input_hashes},
            {"tool_version", tool_version}, {"timestamp", timestamp}, {"notes", notes}};
  }
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return artifact.string() + ".manifest.json";
}

inline void write_manifest(const std::filesystem::path& artifact, const RunManifest& manifest) {
  const auto path = manifest_path_for(artifact);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
}

}  // namespace pplcheck
