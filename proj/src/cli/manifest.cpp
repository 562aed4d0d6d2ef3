#include "srunit/cli/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "srunit/core/errors.hpp"

namespace srunit {

namespace fs = std::filesystem;

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

namespace {

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string content_hash(const fs::path& p) {
  if (fs::is_regular_file(p)) return git_blob_hash(read_all(p));
  if (!fs::is_directory(p)) throw IoError("cannot hash missing path " + p.string());
  std::vector<std::string> lines;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file())
      lines.push_back(fs::relative(e.path(), p).generic_string() + " " + git_blob_hash(read_all(e.path())));
  std::sort(lines.begin(), lines.end());
  std::string listing;
  for (const auto& l : lines) listing += l + "\n";
  return git_blob_hash(listing);
}

std::string inputs_hash(const std::vector<fs::path>& inputs) {
  std::string listing;
  for (const auto& p : inputs) listing += p.string() + " " + (fs::exists(p) ? content_hash(p) : "missing") + "\n";
  return git_blob_hash(listing);
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j{{"command", command}, {"argv", argv},         {"config", config},           {"seed", seed},
                   {"input_hash", input_hash}, {"outputs", outputs}, {"duration_s", duration_s}, {"status", status}};
  if (!error.empty()) j["error"] = error;
  return j;
}

void append_manifest(const fs::path& path, const RunManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << m.to_json().dump() << '\n';
}

}  // namespace srunit
