#pragma once

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmrep/error.hpp"

namespace pmrep::app {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) == 1, ErrorKind::InvalidArgument,
          "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

/// Row-oriented CSV text; doubles use the shortest round-trip form, NaN is an empty field.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::string_view header) {
    text_.append(header);
    text_.push_back('\n');
  }

  CsvBuilder& operator<<(double v) {
    sep();
    if (std::isnan(v)) return *this;
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    text_.append(buf, r.ptr);
    return *this;
  }
  CsvBuilder& operator<<(std::uint64_t v) {
    sep();
    char buf[24];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    text_.append(buf, r.ptr);
    return *this;
  }
  CsvBuilder& operator<<(std::string_view s) {
    sep();
    text_.append(s);
    return *this;
  }
  void end_row() {
    text_.push_back('\n');
    fresh_ = true;
  }
  void reserve(std::size_t bytes) { text_.reserve(bytes); }
  const std::string& str() const { return text_; }

 private:
  void sep() {
    if (!fresh_) text_.push_back(',');
    fresh_ = false;
  }
  std::string text_;
  bool fresh_ = true;
};

struct ArtifactRecord {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes files under one directory and remembers their hashes for the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    require(!ec, ErrorKind::InvalidArgument, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, std::string_view content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    require(static_cast<bool>(out), ErrorKind::InvalidArgument, "failed writing " + path.string());
    records_.push_back({name, sha256_hex(content), content.size()});
  }

  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

  /// The manifest itself is not hashed.
  void write_manifest(nlohmann::json manifest) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& r : records_) files.push_back({{"name", r.name}, {"sha256", r.sha256}, {"bytes", r.bytes}});
    manifest["files"] = files;
    const auto path = dir_ / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << "\n";
  }

  const std::vector<ArtifactRecord>& records() const { return records_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactRecord> records_;
};

}  // namespace pmrep::app
