#include "srunit/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace srunit {

nlohmann::json spec_to_json(const SyntheticDomainSpec& spec) {
  nlohmann::json j;
  j["class_palette"] = spec.class_palette;
  j["class_histogram"] = spec.class_histogram;
  std::vector<std::string> shapes;
  for (auto s : spec.shape_family) shapes.push_back(to_string(s));
  j["shape_family"] = shapes;
  j["style_matrix"] = spec.style.matrix;
  j["style_offset"] = spec.style.offset;
  j["image_size"] = spec.image_size;
  j["background_color"] = spec.background_color;
  return j;
}

SyntheticDomainSpec spec_from_json(const nlohmann::json& j) {
  try {
    SyntheticDomainSpec s;
    s.class_palette = j.at("class_palette").get<std::vector<Rgb>>();
    s.class_histogram = j.at("class_histogram").get<std::vector<double>>();
    for (const auto& name : j.at("shape_family")) s.shape_family.push_back(parse_shape_family(name.get<std::string>()));
    s.style.matrix = j.at("style_matrix").get<std::array<double, 9>>();
    s.style.offset = j.at("style_offset").get<std::array<double, 3>>();
    s.image_size = j.at("image_size").get<Index>();
    s.background_color = j.at("background_color").get<Rgb>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad domain spec: ") + e.what());
  }
}

std::string sample_file_name(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05ld.png", static_cast<long>(i));
  return buf;
}

void write_domain(const fs::path& root, const std::string& name, const std::vector<SyntheticSample>& samples) {
  const fs::path img_dir = root / name / "images", mask_dir = root / name / "masks";
  fs::create_directories(img_dir);
  fs::create_directories(mask_dir);
  for (size_t i = 0; i < samples.size(); ++i) {
    const std::string f = sample_file_name(static_cast<Index>(i));
    write_png((img_dir / f).string(), samples[i].image);
    write_png((mask_dir / f).string(), samples[i].mask);
  }
}

DomainData load_domain(const fs::path& root, const std::string& name, Index limit) {
  const fs::path img_dir = root / name / "images", mask_dir = root / name / "masks";
  if (!fs::is_directory(img_dir)) throw IoError("missing image directory " + img_dir.string());
  DomainData d;
  d.name = name;
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") d.files.push_back(e.path().filename().string());
  std::sort(d.files.begin(), d.files.end());
  if (limit >= 0 && static_cast<Index>(d.files.size()) > limit) d.files.resize(static_cast<size_t>(limit));
  const bool masks = fs::is_directory(mask_dir);
  for (const auto& f : d.files) {
    d.images.push_back(read_png((img_dir / f).string()));
    if (masks) {
      if (!fs::exists(mask_dir / f)) throw IoError("mask missing for " + f);
      d.masks.push_back(read_png((mask_dir / f).string()));
      if (d.masks.back().channels != 1) throw IoError("mask " + f + " is not single-channel");
    }
  }
  return d;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

nlohmann::json read_manifest(const fs::path& root) { return read_json(root / "manifest.json"); }

std::optional<SyntheticDomainSpec> manifest_spec(const fs::path& root, const std::string& domain) {
  if (!fs::exists(root / "manifest.json")) return std::nullopt;
  const auto m = read_manifest(root);
  if (!m.contains("domains") || !m["domains"].contains(domain) || !m["domains"][domain].contains("spec"))
    return std::nullopt;
  return spec_from_json(m["domains"][domain]["spec"]);
}

}  // namespace srunit
