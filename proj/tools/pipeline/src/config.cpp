#include "modelmap_cli/config.hpp"

#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "config_schema.hpp"
#include "modelmap/error.hpp"

namespace modelmap::cli {

using nlohmann::json;

const std::string& config_schema() {
  static const std::string schema(detail::kConfigSchema);
  return schema;
}

bool Selector::matches(const ModelMeta& m) const {
  if (!groups.empty() && (!m.group || std::find(groups.begin(), groups.end(), *m.group) == groups.end())) {
    return false;
  }
  if (!ids.empty() && std::find(ids.begin(), ids.end(), m.id) == ids.end()) return false;
  if ((step || min_step || max_step) && !m.step) return false;
  if (step && *m.step != *step) return false;
  if (min_step && *m.step < *min_step) return false;
  if (max_step && *m.step > *max_step) return false;
  for (const auto& [key, value] : tags) {
    const auto it = m.tags.find(key);
    if (it == m.tags.end() || it->second != value) return false;
  }
  return true;
}

bool Selector::empty() const {
  return groups.empty() && ids.empty() && !step && !min_step && !max_step && tags.empty();
}

namespace {

void validate_against_schema(const json& doc) {
  static const rapidjson::SchemaDocument schema = [] {
    rapidjson::Document sd;
    sd.Parse(config_schema().c_str());
    if (sd.HasParseError()) throw ConfigError("internal: embedded config schema does not parse");
    return rapidjson::SchemaDocument(sd);
  }();

  rapidjson::Document d;
  const std::string text = doc.dump();
  d.Parse(text.c_str());
  rapidjson::SchemaValidator validator(schema);
  if (!d.Accept(validator)) {
    rapidjson::StringBuffer where, rule;
    validator.GetInvalidDocumentPointer().StringifyUriFragment(where);
    validator.GetInvalidSchemaPointer().StringifyUriFragment(rule);
    std::string at = where.GetString();
    if (at.size() > 1 && at.front() == '#') at.erase(0, 1);
    if (at.empty()) at = "/";
    throw ConfigError("config violates schema at '" + at + "' (rule '" +
                      validator.GetInvalidSchemaKeyword() + "' in " + rule.GetString() + ")");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::vector<IdPair> read_pairs(const json& arr) {
  std::vector<IdPair> out;
  for (const auto& p : arr) out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return out;
}

Selector read_selector(const json& obj, const char* key) {
  Selector s;
  if (!obj.contains(key)) return s;
  const auto& j = obj.at(key);
  read(j, "groups", s.groups);
  read(j, "ids", s.ids);
  read(j, "step", s.step);
  read(j, "min_step", s.min_step);
  read(j, "max_step", s.max_step);
  if (j.contains("tags")) s.tags = j.at("tags").get<std::map<std::string, std::string>>();
  return s;
}

MatrixInput read_matrix_input(const json& j, const std::filesystem::path& base_dir) {
  MatrixInput in;
  in.path = j.at("path").get<std::string>();
  if (in.path.is_relative()) in.path = base_dir / in.path;
  if (j.contains("format")) in.format = parse_format(j.at("format").get<std::string>());
  read(j, "floor", in.floor);
  if (!std::filesystem::exists(in.path)) {
    throw ConfigError("input file '" + in.path.string() + "' does not exist");
  }
  return in;
}

Scale read_scale(const json& j, const char* key, Scale fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::string>() == "raw_nats" ? Scale::raw_nats : Scale::bits_per_byte;
}

FixtureSpec read_fixture(const json& j) {
  FixtureSpec f;
  read(j, "seed", f.seed);
  read(j, "n_texts", f.n_texts);
  read(j, "groups", f.groups);
  read(j, "checkpoints", f.checkpoints);
  read(j, "start_step", f.start_step);
  read(j, "step_stride", f.step_stride);
  read(j, "weight_dim", f.weight_dim);
  read(j, "alpha", f.alpha);
  read(j, "input_scale", f.input_scale);
  read(j, "amplitude", f.amplitude);
  read(j, "group_separation", f.group_separation);
  read(j, "outlier_texts", f.outlier_texts);
  read(j, "weight_spike_step", f.weight_spike_step);
  read(j, "quantized_twins", f.quantized_twins);
  read(j, "anomalous_groups", f.anomalous_groups);
  return f;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  validate_against_schema(doc);

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
  if (doc.contains("threads")) cfg.threads = doc.at("threads").get<unsigned>();

  const auto& inputs = doc.at("inputs");
  if (inputs.contains("loglik")) cfg.loglik = read_matrix_input(inputs.at("loglik"), base_dir);
  if (inputs.contains("map")) cfg.map = read_matrix_input(inputs.at("map"), base_dir);
  if (inputs.contains("weights")) cfg.weights = read_matrix_input(inputs.at("weights"), base_dir);
  if (inputs.contains("fixture")) cfg.fixture = read_fixture(inputs.at("fixture"));
  const int sources = int(cfg.loglik.has_value()) + int(cfg.map.has_value()) + int(cfg.fixture.has_value());
  require(sources <= 1, "inputs: give at most one of loglik, map and fixture");
  require(!(cfg.fixture && cfg.weights), "inputs: a fixture provides its own weights");

  if (doc.contains("preprocess")) {
    const auto& p = doc.at("preprocess");
    read(p, "clip_quantile", cfg.preprocess.clip_quantile);
    read(p, "exclude_models", cfg.preprocess.exclude_models);
    if (p.contains("text_outliers")) {
      const auto& t = p.at("text_outliers");
      TextOutlierConfig to;
      read(t, "fraction", to.fraction);
      read(t, "warmup_step", to.warmup_step);
      read(t, "remove", to.remove);
      read(t, "sweep", to.sweep);
      to.select = read_selector(t, "select");
      cfg.preprocess.text_outliers = to;
    }
    require(cfg.has_loglik_source(), "preprocess needs raw log-likelihoods (inputs.loglik or inputs.fixture)");
  }
  if (doc.contains("center")) {
    const auto& c = doc.at("center");
    cfg.center.scale = read_scale(c, "scale", Scale::bits_per_byte);
    read(c, "recenter", cfg.center.recenter);
  }
  if (doc.contains("kl")) {
    const auto& k = doc.at("kl");
    KlConfig kl;
    if (k.contains("pairs")) kl.pairs = k.at("pairs") == "consecutive" ? PairMode::consecutive : PairMode::all;
    read(k, "group_by", kl.group_by);
    kl.select = read_selector(k, "select");
    if (k.contains("subset_correlation")) kl.subset_seed = k.at("subset_correlation").at("seed").get<std::uint64_t>();
    require(cfg.has_map_source(), "kl needs an input matrix, map or fixture");
    require(!kl.subset_seed || cfg.has_loglik_source(),
            "kl.subset_correlation needs raw log-likelihoods (inputs.loglik or inputs.fixture)");
    cfg.kl = kl;
  }
  if (doc.contains("summarize")) {
    std::vector<SummarizeSetting> settings;
    for (const auto& s : doc.at("summarize").at("settings")) {
      settings.push_back({s.at("setting").get<std::string>(), read_pairs(s.at("pairs"))});
    }
    require(cfg.has_map_source(), "summarize needs an input matrix, map or fixture");
    cfg.summarize = std::move(settings);
  }
  if (doc.contains("outliers")) {
    const auto& o = doc.at("outliers");
    if (o.contains("checkpoints")) {
      const auto& c = o.at("checkpoints");
      CheckpointScanConfig cs;
      if (c.contains("source")) cs.source = c.at("source") == "map" ? ScanSource::map : ScanSource::weights;
      read(c, "k", cs.k);
      cs.select = read_selector(c, "select");
      require(cs.source == ScanSource::map ? cfg.has_map_source() : cfg.has_weights_source(),
              "outliers.checkpoints: the requested source is not among the inputs");
      cfg.checkpoint_scan = cs;
    }
    if (o.contains("seeds")) {
      const auto& s = o.at("seeds");
      SeedScanConfig ss;
      read(s, "k", ss.k);
      ss.select = read_selector(s, "select");
      require(cfg.has_map_source(), "outliers.seeds needs an input matrix, map or fixture");
      cfg.seed_scan = ss;
    }
  }
  if (doc.contains("scaling")) {
    const auto& s = doc.at("scaling");
    ScalingConfig sc;
    read(s, "t0", sc.t0);
    read(s, "t0_grid", sc.t0_grid);
    read(s, "window_steps", sc.window_steps);
    read(s, "window_checkpoints", sc.window_checkpoints);
    read(s, "groups", sc.groups);
    read(s, "exp_map", sc.exp_map);
    sc.exp_scale = read_scale(s, "exp_scale", Scale::raw_nats);
    read(s, "plot", sc.plot);
    require(std::is_sorted(sc.t0_grid.begin(), sc.t0_grid.end()) &&
                std::adjacent_find(sc.t0_grid.begin(), sc.t0_grid.end()) == sc.t0_grid.end(),
            "scaling.t0_grid must be strictly increasing");
    require(cfg.has_map_source(), "scaling needs an input matrix, map or fixture");
    cfg.scaling = sc;
  }
  if (doc.contains("embed")) {
    const auto& e = doc.at("embed");
    EmbedConfig ec;
    read(e, "method", ec.method);
    if (e.contains("source")) ec.source = e.at("source") == "weights" ? EmbedSource::weights : EmbedSource::map;
    ec.select = read_selector(e, "select");
    read(e, "dim", ec.dim);
    read(e, "perplexity", ec.perplexity);
    read(e, "iterations", ec.iterations);
    if (e.contains("init")) ec.init = e.at("init") == "random" ? TsneInit::random : TsneInit::pca;
    read(e, "seed", ec.seed);
    read(e, "acf", ec.acf);
    if (e.contains("line_width")) ec.kl_line_width = e.at("line_width") == "consecutive_kl";
    require(ec.source == EmbedSource::map ? cfg.has_map_source() : cfg.has_weights_source(),
            "embed: the requested source is not among the inputs");
    require(!(ec.kl_line_width && ec.source == EmbedSource::weights),
            "embed.line_width consecutive_kl needs source map");
    cfg.embed = ec;
  }
  if (doc.contains("shift")) {
    const auto& s = doc.at("shift");
    ShiftConfig sh;
    sh.pairs = read_pairs(s.at("pairs"));
    read(s, "n_random", sh.n_random);
    read(s, "sample_size", sh.sample_size);
    read(s, "seed", sh.seed);
    require(sh.sample_size <= sh.pairs.size(), "shift.sample_size exceeds the number of pairs");
    require(cfg.has_map_source(), "shift needs an input matrix, map or fixture");
    cfg.shift = sh;
  }
  if (doc.contains("synth")) {
    const auto& s = doc.at("synth");
    if (s.contains("fbm")) {
      const auto& f = s.at("fbm");
      FbmSynthConfig fc;
      read(f, "hurst", fc.hurst);
      read(f, "n_steps", fc.n_steps);
      read(f, "dim", fc.dim);
      read(f, "n_paths", fc.n_paths);
      read(f, "seed", fc.seed);
      cfg.fbm = fc;
    }
    if (s.contains("folding")) {
      const auto& f = s.at("folding");
      FoldingSynthConfig fc;
      if (f.contains("map")) fc.identity = f.at("map") == "identity";
      read(f, "alpha", fc.alpha);
      read(f, "lambda", fc.lambda);
      read(f, "k_max", fc.k_max);
      read(f, "input_dim", fc.input_dim);
      read(f, "output_dim", fc.output_dim);
      read(f, "n_steps", fc.n_steps);
      read(f, "n_paths", fc.n_paths);
      read(f, "input_scale", fc.input_scale);
      read(f, "seed", fc.seed);
      cfg.folding = fc;
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(doc, base);
}

void override_seeds(ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.fixture) cfg.fixture->seed = seed;
  if (cfg.kl && cfg.kl->subset_seed) cfg.kl->subset_seed = seed;
  if (cfg.embed) cfg.embed->seed = seed;
  if (cfg.shift) cfg.shift->seed = seed;
  if (cfg.fbm) cfg.fbm->seed = seed;
  if (cfg.folding) cfg.folding->seed = seed;
}

}  // namespace modelmap::cli
