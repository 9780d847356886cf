#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsl/core/error.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/optics/bundle.hpp"

namespace ddsl::cli {

inline std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open " + p.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 unavailable");
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &n);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < n; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
  return out;
}

/// Run record: command, resolved config, and the SHA-256 of every input and
/// output file. Directories are expanded to their regular files, sorted.
class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config) {
    j_["tool"] = "ddsl";
    j_["version"] = "1.0.0";
    j_["command"] = std::move(command);
    j_["config"] = std::move(config);
    j_["threads"] = worker_count();
    j_["inputs"] = nlohmann::json::array();
    j_["outputs"] = nlohmann::json::array();
  }

  void input(const std::filesystem::path& p) { add("inputs", p); }
  void output(const std::filesystem::path& p) { add("outputs", p); }
  nlohmann::json& extra() { return j_; }

  void write(const std::filesystem::path& path) const { write_json(path, j_); }

 private:
  void add(const char* key, const std::filesystem::path& p) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) add(key, f);
      return;
    }
    j_[key].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}, {"bytes", std::filesystem::file_size(p)}});
  }

  nlohmann::json j_;
};

}  // namespace ddsl::cli
