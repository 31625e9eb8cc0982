#include "modelmap_cli/outputs.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>

#include "modelmap/error.hpp"

namespace modelmap::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw DataError("SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> chunk{};
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), chunk.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(std::string_view field) {
  if (rows_.empty()) rows_.emplace_back();
  rows_.back().emplace_back(field);
  return *this;
}

CsvTable& CsvTable::add(double v) { return add(format_double(v)); }
CsvTable& CsvTable::add(std::int64_t v) { return add(std::to_string(v)); }
CsvTable& CsvTable::add(std::size_t v) { return add(std::to_string(v)); }
CsvTable& CsvTable::add_empty() { return add(std::string_view{}); }

namespace {

void append_field(std::string& out, const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) {
    out += f;
    return;
  }
  out.push_back('"');
  for (char c : f) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void append_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    append_field(out, fields[i]);
  }
  out.push_back('\n');
}

}  // namespace

std::string CsvTable::str() const {
  std::string out;
  append_line(out, header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) {
      throw AnalysisError("internal: CSV row has " + std::to_string(r.size()) + " fields, header has " +
                          std::to_string(header_.size()));
    }
    append_line(out, r);
  }
  return out;
}

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw ConfigError("cannot create output directory '" + root_.string() + "': " + ec.message());
}

std::filesystem::path OutputDir::path(const std::string& relative) const {
  const auto p = root_ / relative;
  std::filesystem::create_directories(p.parent_path());
  return p;
}

void OutputDir::write_text(const std::string& relative, std::string_view content) {
  const auto p = path(relative);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("failed to write '" + p.string() + "'");
  record(relative);
}

void OutputDir::write_json(const std::string& relative, const nlohmann::json& doc) {
  write_text(relative, doc.dump(2) + "\n");
}

void OutputDir::write_csv(const std::string& relative, const CsvTable& table) {
  write_text(relative, table.str());
}

void OutputDir::record(const std::string& relative) {
  for (const auto& f : files_) {
    if (f == relative) return;
  }
  files_.push_back(relative);
}

void OutputDir::write_manifest(nlohmann::json manifest) {
  auto outputs = nlohmann::json::array();
  for (const auto& f : files_) {
    const auto p = root_ / f;
    outputs.push_back({{"path", f},
                       {"sha256", sha256_file(p)},
                       {"bytes", static_cast<std::uint64_t>(std::filesystem::file_size(p))}});
  }
  manifest["outputs"] = std::move(outputs);
  const auto p = root_ / "manifest.json";
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw DataError("failed to write '" + p.string() + "'");
}

}  // namespace modelmap::cli
