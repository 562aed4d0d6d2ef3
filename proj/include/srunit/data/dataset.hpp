#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "srunit/data/synthetic.hpp"

namespace srunit {

namespace fs = std::filesystem;

nlohmann::json spec_to_json(const SyntheticDomainSpec& spec);
SyntheticDomainSpec spec_from_json(const nlohmann::json& j);

/// One domain on disk: <root>/<name>/images/*.png and optional masks/*.png with
/// matching file names.
struct DomainData {
  std::string name;
  std::vector<std::string> files;  // file names, sorted
  std::vector<Image8> images;
  std::vector<Image8> masks;       // empty when the domain has no masks
  bool has_masks() const { return !masks.empty(); }
};

std::string sample_file_name(Index i);

void write_domain(const fs::path& root, const std::string& name, const std::vector<SyntheticSample>& samples);

/// Loads a domain directory; `limit` < 0 loads everything.
DomainData load_domain(const fs::path& root, const std::string& name, Index limit = -1);

/// Reads <root>/manifest.json.
nlohmann::json read_manifest(const fs::path& root);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// The target-domain spec recorded by make-dataset, if the manifest has one.
std::optional<SyntheticDomainSpec> manifest_spec(const fs::path& root, const std::string& domain);

}  // namespace srunit
