#include "modelmap/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modelmap/error.hpp"

namespace modelmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 5> kMagic = {'M', 'M', 'A', 'P', '1'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b.data(), b.size());
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                 std::chars_format::general, 17);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

double parse_double(const std::string& field, std::size_t row, std::size_t col) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DataError("unparseable value '" + field + "' at (" + std::to_string(row) + "," +
                    std::to_string(col) + ")");
  }
  return value;
}

/// Applies the ingestion policy for non-finite entries.
void sanitize(Matrix& values, const LoadOptions& options) {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      double& x = values(i, j);
      const std::string where = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
      if (std::isnan(x)) throw DataError("non-finite entry (NaN) at " + where);
      if (options.floor && x < *options.floor) {
        x = *options.floor;
        continue;
      }
      if (!std::isfinite(x)) {
        throw DataError("non-finite entry (" + std::string(x < 0 ? "-inf" : "+inf") + ") at " +
                        where + "; use a floor to clamp");
      }
    }
  }
}

json models_to_json(const std::vector<ModelMeta>& models) {
  json arr = json::array();
  for (const auto& m : models) {
    json j;
    j["id"] = m.id;
    j["group"] = m.group ? json(*m.group) : json(nullptr);
    j["step"] = m.step ? json(*m.step) : json(nullptr);
    j["tags"] = m.tags;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<ModelMeta> models_from_json(const json& arr) {
  if (!arr.is_array()) throw DataError("sidecar: 'models' must be an array");
  std::vector<ModelMeta> models;
  for (const auto& j : arr) {
    ModelMeta m;
    if (!j.contains("id") || !j["id"].is_string()) throw DataError("sidecar: model without id");
    m.id = j["id"].get<std::string>();
    if (j.contains("group") && !j["group"].is_null()) m.group = j["group"].get<std::string>();
    if (j.contains("step") && !j["step"].is_null()) {
      const auto step = j["step"].get<std::int64_t>();
      if (step < 0) throw DataError("sidecar: negative step for model '" + m.id + "'");
      m.step = step;
    }
    if (j.contains("tags") && j["tags"].is_object()) {
      for (const auto& [k, v] : j["tags"].items()) {
        m.tags[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    models.push_back(std::move(m));
  }
  return models;
}

json sidecar_json(const std::vector<ModelMeta>& models, const TextSetMeta& texts) {
  json j;
  j["models"] = models_to_json(models);
  j["texts"]["ids"] = texts.ids();
  j["texts"]["byte_lengths"] = texts.byte_lengths();
  return j;
}

void write_sidecar(const json& j, const fs::path& path) {
  auto out = open_out(sidecar_path(path));
  out << j.dump(2) << '\n';
}

struct Payload {
  Matrix values;
  std::vector<std::string> csv_model_ids;
  std::vector<std::string> csv_text_ids;
};

Payload read_csv_payload(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV '" + path.string() + "'");
  auto header = split_csv_line(line);
  if (header.empty() || header.front() != "model_id") {
    throw DataError("CSV header must start with 'model_id'");
  }
  Payload p;
  p.csv_text_ids.assign(header.begin() + 1, header.end());
  const std::size_t n = p.csv_text_ids.size();
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    const std::size_t r = rows.size();
    if (fields.size() != n + 1) {
      throw DataError("dimension mismatch: CSV row " + std::to_string(r) + " has " +
                      std::to_string(fields.size() - 1) + " values, header has " +
                      std::to_string(n));
    }
    p.csv_model_ids.push_back(fields[0]);
    std::vector<double> row(n);
    for (std::size_t c = 0; c < n; ++c) row[c] = parse_double(fields[c + 1], r, c);
    rows.push_back(std::move(row));
  }
  p.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      p.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return p;
}

void write_csv_payload(const Matrix& values, const std::vector<ModelMeta>& models,
                       const TextSetMeta& texts, const fs::path& path) {
  auto out = open_out(path);
  out << "model_id";
  for (const auto& id : texts.ids()) out << ',' << csv_field(id);
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << csv_field(models[static_cast<std::size_t>(i)].id);
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_double(values(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

struct Loaded {
  Matrix values;
  std::vector<ModelMeta> models;
  TextSetMeta texts;
  bool synthetic = false;
  json sidecar;
};

Loaded load_any(const fs::path& path, Format format) {
  Loaded out;
  Payload payload;
  if (format == Format::binary) {
    payload.values = read_container(path);
  } else {
    payload = read_csv_payload(path);
  }
  out.values = std::move(payload.values);
  const auto k = static_cast<std::size_t>(out.values.rows());
  const auto n = static_cast<std::size_t>(out.values.cols());

  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    try {
      out.sidecar = json::parse(read_file(side));
    } catch (const json::exception& e) {
      throw DataError("sidecar '" + side.string() + "': " + e.what());
    }
    out.models = models_from_json(out.sidecar.value("models", json::array()));
    const auto& t = out.sidecar.at("texts");
    out.texts = TextSetMeta(t.at("ids").get<std::vector<std::string>>(),
                            t.at("byte_lengths").get<std::vector<std::int64_t>>());
    if (out.models.size() != k) {
      throw DataError("dimension mismatch: sidecar lists " + std::to_string(out.models.size()) +
                      " models, payload has " + std::to_string(k) + " rows");
    }
    if (out.texts.size() != n) {
      throw DataError("dimension mismatch: sidecar lists " + std::to_string(out.texts.size()) +
                      " texts, payload has " + std::to_string(n) + " columns");
    }
    if (format == Format::csv) {
      for (std::size_t i = 0; i < k; ++i) {
        if (payload.csv_model_ids[i] != out.models[i].id) {
          throw DataError("CSV row " + std::to_string(i) + " id '" + payload.csv_model_ids[i] +
                          "' disagrees with sidecar id '" + out.models[i].id + "'");
        }
      }
    }
  } else {
    out.synthetic = true;
    if (format == Format::csv) {
      out.models.resize(k);
      for (std::size_t i = 0; i < k; ++i) out.models[i].id = payload.csv_model_ids[i];
      out.texts = TextSetMeta(payload.csv_text_ids, std::vector<std::int64_t>(n, 1));
    } else {
      out.models = synthetic_models(k);
      out.texts = TextSetMeta::synthetic(n);
    }
  }
  return out;
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "binary" || name == "bin" || name == "mmap") return Format::binary;
  if (name == "csv") return Format::csv;
  throw ConfigError("unknown matrix format '" + name + "' (expected binary or csv)");
}

Format format_from_path(const fs::path& path) {
  return path.extension() == ".csv" ? Format::csv : Format::binary;
}

fs::path sidecar_path(const fs::path& path) {
  fs::path side = path;
  side.replace_extension(".meta.json");
  return side;
}

void write_container(const Matrix& values, const fs::path& path) {
  auto out = open_out(path);
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) put_f64(out, values(i, j));
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Matrix read_container(const fs::path& path) {
  const std::string bytes = read_file(path);
  constexpr std::size_t header = kMagic.size() + 1 + 4 + 4;
  if (bytes.size() < header || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("'" + path.string() + "' is not an MMAP1 container");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[5] != kVersion) throw DataError("unsupported container version " + std::to_string(p[5]));
  const std::uint32_t k = get_u32(p + 6);
  const std::uint32_t n = get_u32(p + 10);
  const std::uint64_t expected = header + 8ull * k * n;
  if (bytes.size() != expected) {
    throw DataError("dimension mismatch: header declares " + std::to_string(k) + "x" +
                    std::to_string(n) + " but payload has " + std::to_string(bytes.size()) +
                    " bytes (expected " + std::to_string(expected) + ")");
  }
  Matrix values(k, n);
  const unsigned char* cur = p + header;
  for (std::uint32_t i = 0; i < k; ++i) {
    for (std::uint32_t j = 0; j < n; ++j, cur += 8) values(i, j) = get_f64(cur);
  }
  return values;
}

LogLikelihoodMatrix load_matrix(const fs::path& path, Format format, const LoadOptions& options) {
  Loaded l = load_any(path, format);
  sanitize(l.values, options);
  return LogLikelihoodMatrix(std::move(l.values), std::move(l.models), std::move(l.texts),
                             l.synthetic);
}

void save_matrix(const LogLikelihoodMatrix& m, const fs::path& path, Format format) {
  if (format == Format::binary) {
    write_container(m.values(), path);
  } else {
    write_csv_payload(m.values(), m.models(), m.texts(), path);
  }
  write_sidecar(sidecar_json(m.models(), m.texts()), path);
}

void save_map(const CenteredMap& c, const fs::path& path, Format format) {
  if (format == Format::binary) {
    write_container(c.coords(), path);
  } else {
    write_csv_payload(c.coords(), c.models(), c.texts(), path);
  }
  json j = sidecar_json(c.models(), c.texts());
  j["map"]["scale"] = to_string(c.scale());
  j["map"]["centering_inherited"] = c.centering_inherited();
  write_sidecar(j, path);
}

CenteredMap load_map(const fs::path& path, Format format) {
  Loaded l = load_any(path, format);
  sanitize(l.values, {});
  Scale scale = Scale::raw_nats;
  bool inherited = false;
  if (l.sidecar.contains("map")) {
    const auto& mj = l.sidecar["map"];
    scale = mj.value("scale", std::string("raw_nats")) == "bits_per_byte" ? Scale::bits_per_byte
                                                                          : Scale::raw_nats;
    inherited = mj.value("centering_inherited", false);
  }
  return CenteredMap(std::move(l.values), scale, std::move(l.models), std::move(l.texts),
                     inherited);
}

}  // namespace modelmap
