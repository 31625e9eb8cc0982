#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace modelmap::cli {

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
std::string format_double(double v);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// Minimal CSV builder. Fields containing commas, quotes or newlines are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& add(std::string_view field);
  CsvTable& add(double v);
  CsvTable& add(std::int64_t v);
  CsvTable& add(std::size_t v);
  CsvTable& add_empty();

  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Everything the pipeline writes goes through here so that the manifest
/// can list it. Paths are relative to the root.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& relative) const;

  void write_text(const std::string& relative, std::string_view content);
  void write_json(const std::string& relative, const nlohmann::json& doc);
  void write_csv(const std::string& relative, const CsvTable& table);
  /// For files written by other code into path(relative).
  void record(const std::string& relative);

  const std::vector<std::string>& files() const { return files_; }

  /// Hashes every recorded file and writes manifest.json (not listed in itself).
  void write_manifest(nlohmann::json manifest);

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

}  // namespace modelmap::cli
