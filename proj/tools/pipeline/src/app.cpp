#include "modelmap_cli/app.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "modelmap/error.hpp"
#include "modelmap/matrix_io.hpp"
#include "modelmap/synthetic.hpp"
#include "modelmap_cli/config.hpp"
#include "modelmap_cli/outputs.hpp"
#include "modelmap_cli/pipeline.hpp"

namespace modelmap::cli {

using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool recenter = false;
  std::optional<double> floor;
  bool quiet = false;
};

/// Where the models come from, shared by most subcommands.
struct Source {
  std::string input;
  std::string map;
  std::string weights;
  std::string format;
};

void add_source_options(CLI::App* sub, Source& s, bool with_weights) {
  sub->add_option("-i,--input", s.input, "Log-likelihood matrix (.mmap/.bin or .csv)");
  sub->add_option("--map", s.map, "Centered map written by `modelmap center` (instead of --input)");
  sub->add_option("--format", s.format, "Input format; inferred from the extension when omitted")
      ->check(CLI::IsMember({"binary", "csv"}));
  if (with_weights) sub->add_option("--weights", s.weights, "Weight-space trajectory matrix (models as rows)");
}

json matrix_input(const std::string& path, const std::string& format) {
  json j{{"path", path}};
  if (!format.empty()) j["format"] = format;
  return j;
}

json inputs_of(const Source& s) {
  json in = json::object();
  if (!s.input.empty()) in["loglik"] = matrix_input(s.input, s.format);
  if (!s.map.empty()) in["map"] = matrix_input(s.map, s.format);
  if (!s.weights.empty()) in["weights"] = matrix_input(s.weights, {});
  return in;
}

json selector(const std::vector<std::string>& groups, const std::optional<std::int64_t>& step) {
  json j = json::object();
  if (!groups.empty()) j["groups"] = groups;
  if (step) j["step"] = *step;
  return j;
}

std::vector<std::pair<std::string, std::string>> read_pairs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pairs file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("pairs file line without a comma: '" + line + "'");
    auto a = line.substr(0, comma), b = line.substr(comma + 1);
    if (first && a == "base_id") {
      first = false;
      continue;
    }
    first = false;
    pairs.emplace_back(std::move(a), std::move(b));
  }
  return pairs;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void emit_error(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}}.dump() << "\n";
}

/// `synth takagi`: maps one Brownian path and writes both trajectories.
void write_takagi_paths(const TakagiSpec& spec, std::size_t steps, double input_scale,
                        const std::string& output_dir, std::ostream* log) {
  OutputDir out(output_dir);
  const FbmGenerator gen(0.5, steps);
  const auto input = gen.sample(spec.input_dim, spec.seed);
  Trajectory scaled = input;
  scaled.points *= input_scale;
  const TakagiMap f(spec);
  const auto mapped = f.apply(scaled);

  auto save = [&](const Trajectory& t, const std::string& name, const std::string& prefix) {
    std::vector<ModelMeta> models;
    for (auto s : t.steps) {
      ModelMeta m;
      m.id = "t" + std::to_string(s);
      m.group = "path";
      m.step = s;
      models.push_back(std::move(m));
    }
    std::vector<std::string> ids;
    for (Eigen::Index c = 0; c < t.points.cols(); ++c) ids.push_back(prefix + std::to_string(c));
    const LogLikelihoodMatrix m(t.points, models,
                                TextSetMeta(ids, std::vector<std::int64_t>(ids.size(), 1)));
    save_matrix(m, out.path(name + ".mmap"), Format::binary);
    out.record(name + ".mmap");
    out.record(name + ".meta.json");
  };
  save(input, "takagi_input", "w");
  save(mapped, "takagi_output", "f");
  out.write_json("takagi.json", {{"alpha", spec.alpha}, {"lambda", spec.lambda}, {"k_max", spec.k_max},
                                 {"input_dim", spec.input_dim}, {"output_dim", spec.output_dim},
                                 {"steps", steps}, {"input_scale", input_scale}, {"seed", spec.seed},
                                 {"tail_bound", f.tail_bound()}});
  out.write_manifest({{"tool", "modelmap"}, {"version", MODELMAP_VERSION}, {"command", "synth takagi"},
                      {"inputs", json::array()}, {"warnings", json::array()}});
  if (log) *log << "wrote " << output_dir << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"modelmap: KL maps, trajectory scaling and embeddings for families of language models"};
  app.set_version_flag("--version", std::string(MODELMAP_VERSION));
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment configuration (JSON) for `run`");
  app.add_option("-o,--output-dir", g.output_dir, "Output directory (default: modelmap-out)");
  app.add_option("--seed", g.seed, "Override every seed in the configuration");
  app.add_option("--threads", g.threads, "Worker threads (fallback: MODELMAP_THREADS, then 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--recenter", g.recenter, "Re-center model subsets instead of inheriting the joint centering");
  app.add_option("--floor", g.floor, "Clamp log-likelihoods below this value (including -inf) instead of failing");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  // Each subcommand fills `doc` (a configuration document) or `direct`.
  json doc;
  std::function<void()> direct;
  std::string command = "run";
  std::optional<Format> export_matrix;

  auto* run = app.add_subcommand("run", "Run every block of a configuration file (--config)");

  Source ingest_src;
  std::string ingest_to;
  auto* ingest = app.add_subcommand("ingest", "Validate a matrix, report its shape and entropy bound, optionally convert it");
  add_source_options(ingest, ingest_src, false);
  ingest->add_option("--to", ingest_to, "Also write the matrix in this format")->check(CLI::IsMember({"binary", "csv"}));
  ingest->callback([&] {
    command = "ingest";
    doc = {{"inputs", inputs_of(ingest_src)}};
    if (!ingest_to.empty()) export_matrix = parse_format(ingest_to);
  });

  Source center_src;
  std::string center_scale = "bits_per_byte";
  std::optional<double> clip;
  std::optional<double> text_fraction;
  std::int64_t warmup = 1430;
  auto* center = app.add_subcommand("center", "Double-center (and rescale) a matrix; writes map.mmap");
  add_source_options(center, center_src, false);
  center->add_option("--scale", center_scale, "Map scale")->check(CLI::IsMember({"bits_per_byte", "raw_nats"}));
  center->add_option("--clip-quantile", clip, "Raise entries below this quantile to it first");
  center->add_option("--remove-outlier-texts", text_fraction, "Drop this fraction of the most unstable texts first");
  center->add_option("--warmup", warmup, "Checkpoint pairs before this step are ignored by the text scan");
  center->callback([&] {
    command = "center";
    doc = {{"inputs", inputs_of(center_src)}, {"center", {{"scale", center_scale}}}};
    json pre = json::object();
    if (clip) pre["clip_quantile"] = *clip;
    if (text_fraction) pre["text_outliers"] = {{"fraction", *text_fraction}, {"warmup_step", warmup}};
    if (!pre.empty()) doc["preprocess"] = pre;
  });

  Source kl_src;
  std::string kl_pairs = "all", kl_group_by = "group", kl_scale = "bits_per_byte";
  std::vector<std::string> kl_groups;
  std::optional<std::int64_t> kl_step;
  std::optional<std::uint64_t> kl_subset_seed;
  auto* kl = app.add_subcommand("kl", "KL estimates with standard errors between models");
  add_source_options(kl, kl_src, false);
  kl->add_option("--pairs", kl_pairs, "all: every pair; consecutive: successive checkpoints")
      ->check(CLI::IsMember({"all", "consecutive"}));
  kl->add_option("--group-by", kl_group_by, "Trajectory key for consecutive pairs: group, step (one trajectory) or tag:<key>");
  kl->add_option("--groups", kl_groups, "Only models in these groups");
  kl->add_option("--step", kl_step, "Only models at this training step");
  kl->add_option("--scale", kl_scale, "Units of the estimates")->check(CLI::IsMember({"bits_per_byte", "raw_nats"}));
  kl->add_option("--subset-correlation-seed", kl_subset_seed,
                 "Also correlate the estimates across two random halves of the texts");
  kl->callback([&] {
    command = "kl";
    json block{{"pairs", kl_pairs}, {"group_by", kl_group_by}, {"select", selector(kl_groups, kl_step)}};
    if (kl_subset_seed) block["subset_correlation"] = {{"seed", *kl_subset_seed}};
    doc = {{"inputs", inputs_of(kl_src)}, {"center", {{"scale", kl_scale}}}, {"kl", block}};
  });

  Source sum_src;
  std::string sum_settings;
  auto* summarize = app.add_subcommand("summarize", "Median, mean and SD of KL over named sets of model pairs");
  add_source_options(summarize, sum_src, false);
  summarize->add_option("--settings", sum_settings, "JSON file: [{\"setting\": name, \"pairs\": [[a, b], ...]}, ...]")
      ->required();
  summarize->callback([&] {
    command = "summarize";
    doc = {{"inputs", inputs_of(sum_src)}, {"summarize", {{"settings", read_json_file(sum_settings)}}}};
  });

  auto* outliers = app.add_subcommand("outliers", "Outlier scans over texts, checkpoints or seeds");
  outliers->require_subcommand(1);
  Source ot_src;
  double ot_fraction = 0.03;
  std::int64_t ot_warmup = 1430;
  bool ot_sweep = false;
  auto* ot = outliers->add_subcommand("texts", "Rank texts by their largest jump between consecutive checkpoints");
  add_source_options(ot, ot_src, false);
  ot->add_option("--fraction", ot_fraction, "Fraction of texts to mark for removal");
  ot->add_option("--warmup", ot_warmup, "Ignore checkpoint pairs that start before this step");
  ot->add_flag("--sweep", ot_sweep, "Also write consecutive KL after removing the top 10, 100, 200, ... texts");
  ot->callback([&] {
    command = "outliers texts";
    doc = {{"inputs", inputs_of(ot_src)},
           {"preprocess", {{"text_outliers", {{"fraction", ot_fraction}, {"warmup_step", ot_warmup},
                                              {"sweep", ot_sweep}, {"remove", false}}}}}};
  });
  Source oc_src;
  std::string oc_source = "weights";
  double oc_k = 10.0;
  auto* oc = outliers->add_subcommand("checkpoints", "Flag checkpoints whose step-to-step distance is anomalous");
  add_source_options(oc, oc_src, true);
  oc->add_option("--source", oc_source, "Distance used: weight-space squared distance or map KL")
      ->check(CLI::IsMember({"weights", "map"}));
  oc->add_option("--k", oc_k, "Threshold is median + k * MAD");
  oc->callback([&] {
    command = "outliers checkpoints";
    doc = {{"inputs", inputs_of(oc_src)}, {"outliers", {{"checkpoints", {{"source", oc_source}, {"k", oc_k}}}}}};
  });
  Source os_src;
  double os_k = 5.0;
  std::vector<std::string> os_groups;
  std::optional<std::int64_t> os_step;
  auto* os = outliers->add_subcommand("seeds", "Flag models whose median KL to the others is anomalous");
  add_source_options(os, os_src, false);
  os->add_option("--k", os_k, "Threshold is median + k * MAD of the row medians");
  os->add_option("--groups", os_groups, "Only models in these groups");
  os->add_option("--step", os_step, "Only models at this training step");
  os->callback([&] {
    command = "outliers seeds";
    doc = {{"inputs", inputs_of(os_src)},
           {"outliers", {{"seeds", {{"k", os_k}, {"select", selector(os_groups, os_step)}}}}}};
  });

  Source sc_src;
  std::int64_t sc_t0 = 0;
  std::optional<std::int64_t> sc_window;
  std::size_t sc_window_ckpt = 10;
  std::vector<std::string> sc_groups;
  std::vector<std::int64_t> sc_grid;
  bool sc_no_exp = false;
  std::string sc_exp_scale = "raw_nats";
  auto* scaling = app.add_subcommand("scaling", "Diffusion exponents in weight space, map space and exp(map)");
  add_source_options(scaling, sc_src, true);
  scaling->add_option("--t0", sc_t0, "Reference checkpoint step")->required();
  scaling->add_option("--window", sc_window, "Fit window in steps past t0 (default: next 10 checkpoints)");
  scaling->add_option("--window-checkpoints", sc_window_ckpt, "Fit window in checkpoints past t0");
  scaling->add_option("--groups", sc_groups, "Trajectories to fit (default: all with 4+ checkpoints)");
  scaling->add_option("--t0-grid", sc_grid, "Also sweep the fit over these reference steps");
  scaling->add_flag("--no-exp-map", sc_no_exp, "Skip the exp(q) trajectory");
  scaling->add_option("--exp-scale", sc_exp_scale, "Map scale that is exponentiated")
      ->check(CLI::IsMember({"raw_nats", "bits_per_byte"}));
  scaling->callback([&] {
    command = "scaling";
    json block{{"t0", sc_t0}, {"window_checkpoints", sc_window_ckpt}, {"exp_map", !sc_no_exp},
               {"exp_scale", sc_exp_scale}};
    if (sc_window) block["window_steps"] = *sc_window;
    if (!sc_groups.empty()) block["groups"] = sc_groups;
    if (!sc_grid.empty()) block["t0_grid"] = sc_grid;
    doc = {{"inputs", inputs_of(sc_src)}, {"scaling", block}};
  });

  Source em_src;
  std::string em_method = "pca", em_init = "pca", em_source = "map";
  int em_dim = 2;
  double em_perplexity = 30.0;
  std::size_t em_iterations = 1000;
  bool em_no_acf = false, em_kl_width = false;
  std::vector<std::string> em_groups;
  auto* embed = app.add_subcommand("embed", "PCA or exact t-SNE embedding of models or weights");
  add_source_options(embed, em_src, true);
  embed->add_option("--method", em_method)->check(CLI::IsMember({"pca", "tsne"}));
  embed->add_option("--source", em_source, "Embed map rows or weight vectors")->check(CLI::IsMember({"map", "weights"}));
  embed->add_option("--dim", em_dim)->check(CLI::Range(2, 3));
  embed->add_option("--perplexity", em_perplexity);
  embed->add_option("--iterations", em_iterations);
  embed->add_option("--init", em_init)->check(CLI::IsMember({"pca", "random"}));
  embed->add_option("--groups", em_groups, "Only models in these groups");
  embed->add_flag("--no-acf", em_no_acf, "Skip the PC1 autocorrelation / spiral-period report");
  embed->add_flag("--kl-line-width", em_kl_width, "Scale trajectory segments by consecutive KL");
  embed->callback([&] {
    command = "embed";
    doc = {{"inputs", inputs_of(em_src)},
           {"embed", {{"method", em_method}, {"source", em_source}, {"dim", em_dim},
                      {"perplexity", em_perplexity}, {"iterations", em_iterations}, {"init", em_init},
                      {"seed", g.seed.value_or(0)}, {"acf", !em_no_acf},
                      {"line_width", em_kl_width ? "consecutive_kl" : "constant"},
                      {"select", selector(em_groups, std::nullopt)}}}};
  });

  Source sh_src;
  std::string sh_pairs;
  std::size_t sh_random = 1000, sh_sample = 0;
  auto* shift = app.add_subcommand("shift", "Cosine similarity of shift vectors (e.g. quantization) within groups");
  add_source_options(shift, sh_src, false);
  shift->add_option("--pairs", sh_pairs, "CSV of base_id,variant_id")->required();
  shift->add_option("--n-random", sh_random, "Random-baseline trials");
  shift->add_option("--sample-size", sh_sample, "Shifts per random-baseline trial (default min(10, all))");
  shift->callback([&] {
    command = "shift";
    json pairs = json::array();
    for (const auto& [a, b] : read_pairs_csv(sh_pairs)) pairs.push_back({a, b});
    json block{{"pairs", pairs}, {"n_random", sh_random}, {"seed", g.seed.value_or(0)}};
    if (sh_sample) block["sample_size"] = sh_sample;
    doc = {{"inputs", inputs_of(sh_src)}, {"shift", block}};
  });

  auto* synth = app.add_subcommand("synth", "Synthetic ground truth: fBm, Takagi maps, folding, fixtures");
  synth->require_subcommand(1);
  std::vector<double> fbm_h{0.1, 0.25, 0.4, 0.5};
  std::size_t fbm_steps = 1024, fbm_dim = 16, fbm_paths = 50;
  auto* fbm = synth->add_subcommand("fbm", "Fit exponents on fractional Brownian motion ensembles");
  fbm->add_option("--hurst", fbm_h, "Hurst exponents");
  fbm->add_option("--steps", fbm_steps);
  fbm->add_option("--dim", fbm_dim, "Independent coordinates per path");
  fbm->add_option("--paths", fbm_paths);
  fbm->callback([&] {
    command = "synth fbm";
    doc = {{"inputs", json::object()},
           {"synth", {{"fbm", {{"hurst", fbm_h}, {"n_steps", fbm_steps}, {"dim", fbm_dim},
                               {"n_paths", fbm_paths}, {"seed", g.seed.value_or(0)}}}}}};
  });
  FoldingSynthConfig fold;
  auto* folding = synth->add_subcommand("folding", "Brownian weights through a Takagi map: estimate alpha = c_q / c_w");
  folding->add_option("--alpha", fold.alpha);
  folding->add_option("--lambda", fold.lambda);
  folding->add_option("--k-max", fold.k_max);
  folding->add_option("--input-dim", fold.input_dim);
  folding->add_option("--output-dim", fold.output_dim);
  folding->add_option("--steps", fold.n_steps);
  folding->add_option("--paths", fold.n_paths);
  folding->add_option("--input-scale", fold.input_scale);
  folding->add_flag("--identity", fold.identity, "Use the identity map (alpha = 1 exactly)");
  folding->callback([&] {
    command = "synth folding";
    doc = {{"inputs", json::object()},
           {"synth", {{"folding", {{"map", fold.identity ? "identity" : "takagi"}, {"alpha", fold.alpha},
                                   {"lambda", fold.lambda}, {"k_max", fold.k_max},
                                   {"input_dim", fold.input_dim}, {"output_dim", fold.output_dim},
                                   {"n_steps", fold.n_steps}, {"n_paths", fold.n_paths},
                                   {"input_scale", fold.input_scale}, {"seed", g.seed.value_or(0)}}}}}};
  });
  TakagiSpec tk;
  std::size_t tk_steps = 1024;
  double tk_scale = 1.0 / 1048576.0;
  auto* takagi = synth->add_subcommand("takagi", "Write a Brownian path and its Takagi image as matrices");
  takagi->add_option("--alpha", tk.alpha);
  takagi->add_option("--lambda", tk.lambda);
  takagi->add_option("--k-max", tk.k_max);
  takagi->add_option("--input-dim", tk.input_dim);
  takagi->add_option("--output-dim", tk.output_dim);
  takagi->add_option("--steps", tk_steps);
  takagi->add_option("--input-scale", tk_scale);
  takagi->callback([&] {
    command = "synth takagi";
    direct = [&] {
      tk.seed = g.seed.value_or(0);
      tk.validate();
      write_takagi_paths(tk, tk_steps, tk_scale, g.output_dir.empty() ? "modelmap-out" : g.output_dir,
                         g.quiet ? nullptr : &err);
    };
  });
  FixtureSpec fx;
  auto* fixture = synth->add_subcommand("fixture", "Write a synthetic log-likelihood matrix and weight trajectories");
  fixture->add_option("--texts", fx.n_texts);
  fixture->add_option("--groups", fx.groups);
  fixture->add_option("--checkpoints", fx.checkpoints);
  fixture->add_option("--start-step", fx.start_step);
  fixture->add_option("--step-stride", fx.step_stride);
  fixture->add_option("--outlier-texts", fx.outlier_texts);
  fixture->add_option("--quantized-twins", fx.quantized_twins, "Twin the last N checkpoints of each group");
  fixture->add_option("--anomalous-groups", fx.anomalous_groups);
  fixture->callback([&] {
    command = "synth fixture";
    doc = {{"inputs", {{"fixture", {{"seed", g.seed.value_or(0)}, {"n_texts", fx.n_texts}, {"groups", fx.groups},
                                    {"checkpoints", fx.checkpoints}, {"start_step", fx.start_step},
                                    {"step_stride", fx.step_stride}, {"outlier_texts", fx.outlier_texts},
                                    {"quantized_twins", fx.quantized_twins},
                                    {"anomalous_groups", fx.anomalous_groups}}}}}};
  });

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      out << MODELMAP_VERSION << "\n";
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      throw ConfigError(e.what());
    }

    std::ostream* log = g.quiet ? nullptr : &err;
    const unsigned threads = resolve_threads(g.threads, std::nullopt);
    if (direct) {
      direct();
      return kExitOk;
    }

    ExperimentConfig cfg;
    RunOptions opts;
    opts.command = command;
    opts.export_matrix = export_matrix;
    if (command == "run") {
      if (app.get_subcommands().empty() && g.config.empty()) {
        out << app.help();
        return kExitConfig;
      }
      if (g.config.empty()) throw ConfigError("run needs --config");
      cfg = load_config(g.config);
      opts.config_path = g.config;
    } else {
      if (!g.config.empty()) throw ConfigError("--config only applies to `run`");
      cfg = parse_config(doc, std::filesystem::current_path());
    }
    (void)run;
    if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
    if (g.seed) override_seeds(cfg, *g.seed);
    if (g.recenter) cfg.center.recenter = true;
    if (g.floor && cfg.loglik) cfg.loglik->floor = g.floor;
    opts.threads = resolve_threads(g.threads, cfg.threads);
    (void)threads;
    opts.log = log;

    const auto result = run_experiment(cfg, opts);
    out << json{{"output_dir", result.output_dir.string()}, {"files", result.files},
                {"warnings", result.warnings}}.dump(2) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    emit_error(err, "config", kExitConfig, e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    emit_error(err, "data", kExitData, e.what());
    return kExitData;
  } catch (const AnalysisError& e) {
    emit_error(err, "analysis", kExitAnalysis, e.what());
    return kExitAnalysis;
  } catch (const std::exception& e) {
    emit_error(err, "internal", kExitInternal, e.what());
    return kExitInternal;
  }
}

}  // namespace modelmap::cli
