#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace srunit {

/// SHA-1 of "blob <size>\0<bytes>", as git hashes file contents.
std::string git_blob_hash(const std::string& bytes);

/// Blob hash of a file; for a directory, the blob hash of its sorted
/// "<relative path> <blob hash>" listing (recursive).
std::string content_hash(const std::filesystem::path& p);

/// Combined hash of several inputs (missing paths hash as their name).
std::string inputs_hash(const std::vector<std::filesystem::path>& inputs);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string input_hash;
  std::vector<std::string> outputs;
  double duration_s = 0;
  std::string status = "ok";
  std::string error;

  nlohmann::json to_json() const;
};

/// Appends one JSON line.
void append_manifest(const std::filesystem::path& path, const RunManifest& m);

}  // namespace srunit
