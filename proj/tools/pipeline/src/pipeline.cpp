#include "modelmap_cli/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "modelmap/divergence.hpp"
#include "modelmap/embed.hpp"
#include "modelmap/error.hpp"
#include "modelmap/matrix_io.hpp"
#include "modelmap/outlier.hpp"
#include "modelmap/parallel.hpp"
#include "modelmap/plot_svg.hpp"
#include "modelmap/scaling.hpp"
#include "modelmap/stats.hpp"
#include "modelmap/synthetic.hpp"
#include "modelmap_cli/fixture.hpp"
#include "modelmap_cli/outputs.hpp"

namespace modelmap::cli {

using nlohmann::json;

unsigned resolve_threads(std::optional<unsigned> flag, std::optional<unsigned> config) {
  if (flag) return std::max(1u, *flag);
  if (config) return std::max(1u, *config);
  if (const char* env = std::getenv("MODELMAP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    throw ConfigError(std::string("MODELMAP_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

namespace {

std::string unit_suffix(Scale s) { return s == Scale::bits_per_byte ? "bits_per_byte" : "nats"; }

/// Non-finite doubles become null so that the JSON stays valid.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Context {
  const ExperimentConfig& cfg;
  OutputDir out;
  unsigned threads = 1;
  std::ostream* log = nullptr;
  json warnings = json::array();
  json inputs = json::array();

  std::optional<LogLikelihoodMatrix> loglik;
  std::optional<LogLikelihoodMatrix> weights;
  /// Raw-nat map when one can be formed; `map` is in the analysis scale.
  std::optional<CenteredMap> raw_map;
  std::optional<CenteredMap> map;

  Context(const ExperimentConfig& c, OutputDir o, unsigned t, std::ostream* l)
      : cfg(c), out(std::move(o)), threads(t), log(l) {}

  void warn(const std::string& msg) {
    warnings.push_back(msg);
    if (log) *log << "warning: " << msg << "\n";
  }
  void note(const std::string& msg) const {
    if (log) *log << msg << "\n";
  }

  void record_input(const std::string& role, const std::filesystem::path& p) {
    json entry{{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)}};
    const auto side = sidecar_path(p);
    if (std::filesystem::exists(side)) entry["sidecar_sha256"] = sha256_file(side);
    inputs.push_back(std::move(entry));
  }

  /// Rows of the analysis map picked by `sel`, recentered when configured.
  CenteredMap view(const Selector& sel) const {
    if (sel.empty()) return *map;
    return select_rows(*map, [&](const ModelMeta& m) { return sel.matches(m); }, cfg.center.recenter);
  }
};

// ---------------------------------------------------------------- grouping

/// Key for grouping rows into trajectories. Rows without the key are skipped.
std::optional<std::string> group_key(const ModelMeta& m, const std::string& group_by) {
  if (group_by == "step") return std::string("all");
  if (group_by == "group") return m.group;
  if (group_by.rfind("tag:", 0) == 0) {
    const auto it = m.tags.find(group_by.substr(4));
    if (it == m.tags.end()) return std::nullopt;
    return it->second;
  }
  throw ConfigError("unknown group_by '" + group_by + "'");
}

/// Ordered map from group name to row indices that carry a step.
std::map<std::string, std::vector<std::size_t>> trajectories_by(const std::vector<ModelMeta>& models,
                                                                const std::string& group_by,
                                                                const Selector& sel) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].step || !sel.matches(models[i])) continue;
    if (auto key = group_key(models[i], group_by)) out[*key].push_back(i);
  }
  for (auto& [name, rows] : out) {
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return *models[a].step < *models[b].step; });
  }
  return out;
}

/// Rows in the given order (unlike select_rows, which keeps source order).
LogLikelihoodMatrix rows_of(const LogLikelihoodMatrix& m, const std::vector<std::size_t>& rows) {
  Matrix values(static_cast<Eigen::Index>(rows.size()), m.values().cols());
  std::vector<ModelMeta> models;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    values.row(static_cast<Eigen::Index>(r)) = m.values().row(static_cast<Eigen::Index>(rows[r]));
    models.push_back(m.models()[rows[r]]);
  }
  return LogLikelihoodMatrix(std::move(values), std::move(models), m.texts(), m.synthetic_metadata());
}

// ------------------------------------------------------------------ inputs

void load_inputs(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.fixture) {
    ctx.note("generating synthetic fixture");
    auto fx = make_fixture(*cfg.fixture);
    save_matrix(fx.loglik, ctx.out.path("inputs/loglik.mmap"), Format::binary);
    ctx.out.record("inputs/loglik.mmap");
    ctx.out.record("inputs/loglik.meta.json");
    save_matrix(fx.weights, ctx.out.path("inputs/weights.mmap"), Format::binary);
    ctx.out.record("inputs/weights.mmap");
    ctx.out.record("inputs/weights.meta.json");
    ctx.inputs.push_back({{"role", "fixture"}, {"seed", cfg.fixture->seed}});
    ctx.loglik = std::move(fx.loglik);
    ctx.weights = std::move(fx.weights);
  }
  if (cfg.loglik) {
    ctx.loglik = load_matrix(cfg.loglik->path, cfg.loglik->resolved_format(), {cfg.loglik->floor});
    ctx.record_input("loglik", cfg.loglik->path);
    if (ctx.loglik->synthetic_metadata()) {
      ctx.warn("no sidecar next to '" + cfg.loglik->path.string() +
               "'; using placeholder metadata (byte length 1 per text, no steps or groups)");
    }
  }
  if (cfg.map) {
    ctx.map = load_map(cfg.map->path, cfg.map->resolved_format());
    ctx.record_input("map", cfg.map->path);
    if (ctx.map->scale() == Scale::raw_nats) ctx.raw_map = ctx.map;
  }
  if (cfg.weights) {
    ctx.weights = load_matrix(cfg.weights->path, cfg.weights->resolved_format(), {cfg.weights->floor});
    ctx.record_input("weights", cfg.weights->path);
  }
}

void write_ingest_summary(Context& ctx) {
  if (!ctx.loglik) return;
  const auto& m = *ctx.loglik;
  std::map<std::string, std::size_t> groups;
  for (const auto& mm : m.models()) ++groups[mm.group.value_or("")];
  const auto bound = entropy_upper_bound(m);
  ctx.out.write_json("ingest.json",
                     {{"models", m.num_models()},
                      {"texts", m.num_texts()},
                      {"mean_bytes", m.texts().mean_bytes()},
                      {"synthetic_metadata", m.synthetic_metadata()},
                      {"groups", groups},
                      {"entropy_upper_bound", {{"bits_per_byte", bound.bits_per_byte}, {"model_id", bound.model_id}}}});
}

// -------------------------------------------------------------- preprocess

void preprocess(Context& ctx) {
  const auto& p = ctx.cfg.preprocess;
  if (!ctx.loglik) return;
  if (!p.exclude_models.empty()) {
    for (const auto& id : p.exclude_models) {
      if (!ctx.loglik->find_model(id)) ctx.warn("exclude_models: unknown model id '" + id + "'");
    }
    ctx.loglik = select_rows(*ctx.loglik, [&](const ModelMeta& m) {
      return std::find(p.exclude_models.begin(), p.exclude_models.end(), m.id) == p.exclude_models.end();
    });
  }
  if (p.clip_quantile > 0.0) ctx.loglik = clip_bottom_quantile(*ctx.loglik, p.clip_quantile);
  if (!p.text_outliers) return;

  const auto& to = *p.text_outliers;
  const auto groups = trajectories_by(ctx.loglik->models(), "group", to.select);
  std::vector<std::string> names;
  std::vector<LogLikelihoodMatrix> trajs;
  for (const auto& [name, rows] : groups) {
    if (rows.size() < 2) continue;
    names.push_back(name);
    trajs.push_back(rows_of(*ctx.loglik, rows));
  }
  if (trajs.empty()) throw AnalysisError("text outlier scan: no group has two or more checkpoints");
  const auto rep = text_outlier_scores(trajs, to.warmup_step, to.fraction);
  const auto& ids = ctx.loglik->texts().ids();

  CsvTable scores({"rank", "text_id", "max_score_nats", "sd_score_nats"});
  for (std::size_t r = 0; r < rep.ranking.size(); ++r) {
    const auto s = rep.ranking[r];
    scores.row().add(r + 1).add(ids[s]).add(rep.max_score[s]).add(rep.sd_score[s]);
  }
  ctx.out.write_csv("text_scores.csv", scores);
  std::string removal;
  for (auto s : rep.removal_set()) removal += ids[s] + "\n";
  ctx.out.write_text("text_removal.txt", removal);
  ctx.out.write_json("text_outliers.json", {{"trajectories", names},
                                            {"post_warmup_step", rep.post_warmup_step},
                                            {"pairs_used", rep.pairs_used},
                                            {"removal_fraction", to.fraction},
                                            {"removal_count", rep.removal_count},
                                            {"removed", to.remove},
                                            {"max_sd_correlation", number(rep.max_sd_correlation)}});

  if (to.sweep) {
    const auto counts = default_sweep_counts(ctx.loglik->num_texts());
    if (counts.empty()) {
      ctx.warn("removal sweep skipped: fewer than 11 texts");
    } else {
      CsvTable sweep({"group", "removed", "step_from", "step_to", "kl_bits_per_byte", "se_bits_per_byte"});
      for (std::size_t g = 0; g < trajs.size(); ++g) {
        for (const auto& curve : removal_sweep(trajs[g], rep.ranking, counts, to.warmup_step)) {
          for (const auto& k : curve.kl) {
            sweep.row().add(names[g]).add(curve.removed).add(k.step_from).add(k.step_to)
                .add(k.estimate.value).add(k.estimate.std_error);
          }
        }
      }
      ctx.out.write_csv("removal_sweep.csv", sweep);
    }
  }
  if (to.remove && rep.removal_count > 0) ctx.loglik = remove_texts(*ctx.loglik, rep.removal_set());
}

// ------------------------------------------------------------------ center

void center(Context& ctx) {
  if (!ctx.loglik) return;
  ctx.raw_map = double_center(*ctx.loglik);
  ctx.map = ctx.cfg.center.scale == Scale::bits_per_byte ? rescale_bits_per_byte(*ctx.raw_map) : *ctx.raw_map;
  save_map(*ctx.map, ctx.out.path("map.mmap"), Format::binary);
  ctx.out.record("map.mmap");
  ctx.out.record("map.meta.json");
}

// ---------------------------------------------------------------------- kl

std::vector<std::pair<std::size_t, std::size_t>> consecutive_index_pairs(
    const std::map<std::string, std::vector<std::size_t>>& groups) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [name, rows] : groups) {
    for (std::size_t t = 0; t + 1 < rows.size(); ++t) pairs.emplace_back(rows[t], rows[t + 1]);
  }
  return pairs;
}

void run_kl(Context& ctx) {
  const auto& k = *ctx.cfg.kl;
  const auto view = ctx.view(k.select);
  const std::string unit = unit_suffix(view.scale());
  std::vector<std::pair<std::size_t, std::size_t>> index_pairs;

  if (k.pairs == PairMode::all) {
    const auto res = kl_matrix(view, std::nullopt, ctx.threads);
    CsvTable table({"model_i", "model_j", "kl_" + unit, "se_" + unit});
    const auto n = res.model_ids.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        table.row().add(res.model_ids[i]).add(res.model_ids[j]).add(res.value(a, b)).add(res.std_error(a, b));
        index_pairs.emplace_back(i, j);
      }
    }
    ctx.out.write_csv("kl_pairs.csv", table);
    CsvTable square([&] {
      std::vector<std::string> h{"model_id"};
      h.insert(h.end(), res.model_ids.begin(), res.model_ids.end());
      return h;
    }());
    for (std::size_t i = 0; i < n; ++i) {
      square.row().add(res.model_ids[i]);
      for (std::size_t j = 0; j < n; ++j) square.add(res.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    ctx.out.write_csv("kl_matrix_" + unit + ".csv", square);
    write_container(res.value, ctx.out.path("kl_matrix_" + unit + ".mmap"));
    ctx.out.record("kl_matrix_" + unit + ".mmap");
    if (res.clamped_radicands > 0) {
      ctx.warn(std::to_string(res.clamped_radicands) + " KL standard-error radicands were negative and clamped to 0");
    }
  } else {
    const auto groups = trajectories_by(view.models(), k.group_by, {});
    CsvTable table({"trajectory", "step_from", "step_to", "model_from", "model_to", "kl_" + unit, "se_" + unit});
    for (const auto& [name, rows] : groups) {
      if (rows.size() < 2) {
        ctx.note("kl: trajectory '" + name + "' has a single checkpoint; skipped");
        continue;
      }
      for (const auto& c : consecutive_kl(view, rows)) {
        table.row().add(name).add(c.step_from).add(c.step_to).add(c.model_from).add(c.model_to)
            .add(c.estimate.value).add(c.estimate.std_error);
      }
    }
    if (table.rows() == 0) {
      throw AnalysisError("kl: no trajectory has two or more checkpoints with training steps");
    }
    ctx.out.write_csv("kl_consecutive.csv", table);
    index_pairs = consecutive_index_pairs(groups);
  }

  if (k.subset_seed) {
    if (!ctx.loglik) throw ConfigError("kl.subset_correlation needs raw log-likelihoods");
    // Random halves of the texts; model rows refer to the selected view.
    const auto sub = k.select.empty()
                         ? *ctx.loglik
                         : select_rows(*ctx.loglik, [&](const ModelMeta& m) { return k.select.matches(m); });
    std::vector<std::size_t> cols(sub.num_texts());
    std::iota(cols.begin(), cols.end(), 0);
    std::mt19937_64 rng(*k.subset_seed);
    std::shuffle(cols.begin(), cols.end(), rng);
    const auto half = cols.size() / 2;
    std::vector<std::size_t> a(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> b(cols.begin() + static_cast<std::ptrdiff_t>(half), cols.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double r = subset_correlation(sub, a, b, index_pairs);
    ctx.out.write_json("kl_subset_correlation.json",
                       {{"pearson_r", number(r)}, {"pairs", index_pairs.size()},
                        {"texts_a", a.size()}, {"texts_b", b.size()}, {"seed", *k.subset_seed}});
  }
}

// --------------------------------------------------------------- summarize

void run_summarize(Context& ctx) {
  const auto& map = *ctx.map;
  const std::string unit = unit_suffix(map.scale());
  json out = json::array();
  CsvTable table({"setting", "n", "median_" + unit, "mean_" + unit, "sd_" + unit});
  for (const auto& s : *ctx.cfg.summarize) {
    std::vector<double> values;
    for (const auto& [a, b] : s.pairs) {
      const auto i = map.find_model(a);
      const auto j = map.find_model(b);
      if (!i) throw DataError("summarize: unknown model id '" + a + "'");
      if (!j) throw DataError("summarize: unknown model id '" + b + "'");
      values.push_back(kl_pair(map, *i, *j).value);
    }
    const auto g = group_summary(values, s.setting);
    out.push_back({{"setting", g.setting}, {"median", g.median}, {"mean", g.mean}, {"sd", g.sd}, {"n", g.n},
                   {"unit", unit}});
    table.row().add(g.setting).add(g.n).add(g.median).add(g.mean).add(g.sd);
  }
  ctx.out.write_json("summary.json", {{"median_rule", "midpoint"}, {"sd", "population"}, {"settings", out}});
  ctx.out.write_csv("summary.csv", table);
}

// ---------------------------------------------------------------- outliers

json scan_json(const AnomalyScan& s) {
  return {{"median", s.median}, {"mad", s.mad}, {"threshold", s.threshold}, {"rule", s.rule},
          {"flagged_steps", s.flagged_steps}};
}

void run_checkpoint_scan(Context& ctx) {
  const auto& c = *ctx.cfg.checkpoint_scan;
  json report = json::object();
  const bool weights = c.source == ScanSource::weights;
  CsvTable table({"trajectory", "step_from", weights ? "sq_distance" : "kl_" + unit_suffix(ctx.map->scale()), "flagged"});
  const auto& models = weights ? ctx.weights->models() : ctx.map->models();
  for (const auto& [name, rows] : trajectories_by(models, "group", c.select)) {
    std::vector<std::int64_t> steps;
    std::vector<double> stat;
    if (weights) {
      for (const auto& [step, d] : consecutive_sq_distances(rows_of(*ctx.weights, rows))) {
        steps.push_back(step);
        stat.push_back(d);
      }
    } else {
      if (rows.size() < 2) continue;
      for (const auto& k : consecutive_kl(*ctx.map, rows)) {
        steps.push_back(k.step_from);
        stat.push_back(k.estimate.value);
      }
    }
    if (stat.size() < 5) {
      ctx.note("checkpoint scan: trajectory '" + name + "' has fewer than 5 intervals; skipped");
      continue;
    }
    const auto scan = checkpoint_anomaly_scan(steps, stat, c.k);
    report[name] = scan_json(scan);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const bool flagged = std::find(scan.flagged_steps.begin(), scan.flagged_steps.end(), steps[i]) !=
                           scan.flagged_steps.end();
      table.row().add(name).add(steps[i]).add(stat[i]).add(flagged ? "1" : "0");
    }
  }
  if (report.empty()) throw AnalysisError("checkpoint scan: no trajectory has 5 or more intervals");
  ctx.out.write_json("checkpoint_scan.json", {{"source", weights ? "weights" : "map"}, {"k", c.k}, {"trajectories", report}});
  ctx.out.write_csv("checkpoint_scan.csv", table);
}

void run_seed_scan(Context& ctx) {
  const auto& s = *ctx.cfg.seed_scan;
  const auto view = ctx.view(s.select);
  const auto kl = kl_matrix(view, std::nullopt, ctx.threads);
  const auto scan = seed_anomaly_scan(kl, s.k);
  json medians = json::object();
  for (std::size_t i = 0; i < kl.model_ids.size(); ++i) medians[kl.model_ids[i]] = scan.row_medians[i];
  ctx.out.write_json("seed_scan.json", {{"k", s.k}, {"threshold", scan.threshold}, {"rule", scan.rule},
                                        {"row_medians", medians}, {"flagged", scan.flagged_ids},
                                        {"unit", unit_suffix(view.scale())}});
}

// ----------------------------------------------------------------- scaling

FitWindow window_of(const ScalingConfig& s) {
  if (s.window_steps) return FitWindow::steps(*s.window_steps);
  return FitWindow::count(s.window_checkpoints);
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

void run_scaling(Context& ctx) {
  const auto& s = *ctx.cfg.scaling;
  const auto window = window_of(s);
  const auto groups = trajectories_by(ctx.map->models(), "group", {});
  std::vector<std::string> names = s.groups;
  if (names.empty()) {
    for (const auto& [name, rows] : groups) {
      if (rows.size() >= 4) names.push_back(name);
    }
  }
  if (names.empty()) throw AnalysisError("scaling: no trajectory with 4 or more checkpoints");

  std::optional<ExpMap> exp_map;
  if (s.exp_map) {
    if (s.exp_scale == Scale::raw_nats) {
      if (!ctx.raw_map) throw ConfigError("scaling.exp_scale raw_nats needs raw log-likelihoods or a raw-nat map");
      exp_map = exp_coordinates(*ctx.raw_map);
    } else {
      if (ctx.map->scale() != Scale::bits_per_byte) {
        exp_map = exp_coordinates(rescale_bits_per_byte(*ctx.map), {30.0, true});
      } else {
        exp_map = exp_coordinates(*ctx.map, {30.0, true});
      }
    }
    if (exp_map->capped_entries > 0) {
      ctx.warn(std::to_string(exp_map->capped_entries) + " map entries capped at 30 before exponentiation");
    }
  }

  std::optional<std::map<std::string, std::vector<std::size_t>>> weight_groups;
  if (ctx.weights) weight_groups = trajectories_by(ctx.weights->models(), "group", {});

  CsvTable table({"trajectory", "t0", "window", "n_points", "c_w", "c_q", "alpha", "c_exp_q", "diff",
                  "r2_w", "r2_q", "r2_exp_q", "fractal_dimension_q", "hurst_q"});
  CsvTable sweep_table({"trajectory", "space", "t0", "c", "r_squared", "n_points", "error"});

  for (const auto& name : names) {
    const auto it = groups.find(name);
    if (it == groups.end()) throw DataError("scaling: no trajectory named '" + name + "'");
    const auto traj_q = make_trajectory(*ctx.map, it->second);
    std::optional<Trajectory> traj_e;
    if (exp_map) traj_e = make_trajectory(*exp_map, it->second);
    std::optional<Trajectory> traj_w;
    if (weight_groups) {
      const auto wit = weight_groups->find(name);
      if (wit != weight_groups->end()) {
        traj_w = make_trajectory(rows_of(*ctx.weights, wit->second), Space::weights);
      } else {
        ctx.warn("scaling: weights have no trajectory '" + name + "'; c_w left empty");
      }
    }

    std::optional<ScalingFit> fit_w, fit_e;
    ScalingFit fit_q;
    std::optional<double> alpha, diff;
    if (traj_w) {
      const auto cmp = compare_spaces(*traj_w, traj_q, traj_e ? &*traj_e : nullptr, s.t0, window);
      fit_w = cmp.fit_w;
      fit_q = cmp.fit_q;
      fit_e = cmp.fit_exp_q;
      alpha = cmp.alpha;
      diff = cmp.diff;
    } else {
      fit_q = fit_trajectory(traj_q, s.t0, window);
      if (traj_e) {
        fit_e = fit_trajectory(*traj_e, s.t0, window);
        diff = fit_e->c - fit_q.c;
      }
    }
    table.row().add(name).add(s.t0).add(fit_q.window).add(fit_q.n_points);
    fit_w ? table.add(fit_w->c) : table.add_empty();
    table.add(fit_q.c);
    alpha ? table.add(*alpha) : table.add_empty();
    fit_e ? table.add(fit_e->c) : table.add_empty();
    diff ? table.add(*diff) : table.add_empty();
    fit_w ? table.add(fit_w->r_squared) : table.add_empty();
    table.add(fit_q.r_squared);
    fit_e ? table.add(fit_e->r_squared) : table.add_empty();
    if (fit_q.c > 0.0) {
      const auto dim = fractal_dimension(fit_q.c);
      table.add(dim.dimension).add(dim.hurst);
    } else {
      ctx.warn("scaling: '" + name + "' has non-positive map exponent; fractal dimension left empty");
      table.add_empty().add_empty();
    }

    if (!s.t0_grid.empty()) {
      auto emit = [&](const char* space, const Trajectory& t) {
        for (const auto& e : exponent_sweep(t, s.t0_grid, window, ctx.threads).entries) {
          sweep_table.row().add(name).add(space).add(e.t0);
          if (e.fit) {
            sweep_table.add(e.fit->c).add(e.fit->r_squared).add(e.fit->n_points).add_empty();
          } else {
            sweep_table.add_empty().add_empty().add_empty().add(e.error);
          }
        }
      };
      if (traj_w) emit("weights", *traj_w);
      emit("loglik_map", traj_q);
      if (traj_e) emit("exp_map", *traj_e);
    }

    if (s.plot) {
      std::vector<svg::LogLogSeries> series;
      if (traj_w) series.push_back({"weights", squared_displacement(*traj_w, s.t0, window), fit_w});
      series.push_back({"map q", squared_displacement(traj_q, s.t0, window), fit_q});
      if (traj_e) series.push_back({"exp(q)", squared_displacement(*traj_e, s.t0, window), fit_e});
      ctx.out.write_text("scaling_" + safe_name(name) + ".svg",
                         svg::loglog_plot(series, name + ": squared displacement from step " + std::to_string(s.t0)));
    }
  }
  ctx.out.write_csv("scaling_table.csv", table);
  if (!s.t0_grid.empty()) ctx.out.write_csv("scaling_sweep.csv", sweep_table);
}

// ------------------------------------------------------------------- embed

void run_embed(Context& ctx) {
  const auto& e = *ctx.cfg.embed;
  Matrix data;
  std::vector<ModelMeta> models;
  std::optional<CenteredMap> view;
  if (e.source == EmbedSource::map) {
    view = ctx.view(e.select);
    data = view->coords();
    models = view->models();
  } else {
    const auto w = e.select.empty()
                       ? *ctx.weights
                       : select_rows(*ctx.weights, [&](const ModelMeta& m) { return e.select.matches(m); });
    data = w.values();
    models = w.models();
  }

  Embedding emb;
  if (e.method == "pca") {
    emb = pca(data, static_cast<std::size_t>(e.dim));
  } else {
    TsneParams p;
    p.dim = e.dim;
    p.perplexity = e.perplexity;
    p.seed = e.seed;
    p.iterations = e.iterations;
    p.init = e.init;
    emb = tsne_from_coords(data, p);
  }
  for (const auto& w : emb.warnings) ctx.warn("embed: " + w);

  std::vector<std::string> header{"model_id", "group", "step"};
  const char* axes[] = {"x", "y", "z"};
  for (Eigen::Index c = 0; c < emb.coords.cols(); ++c) header.emplace_back(axes[c]);
  CsvTable table(header);
  for (std::size_t i = 0; i < models.size(); ++i) {
    table.row().add(models[i].id).add(models[i].group.value_or(""));
    models[i].step ? table.add(*models[i].step) : table.add_empty();
    for (Eigen::Index c = 0; c < emb.coords.cols(); ++c) table.add(emb.coords(static_cast<Eigen::Index>(i), c));
  }
  ctx.out.write_csv("embedding.csv", table);

  json meta{{"method", e.method}, {"source", e.source == EmbedSource::map ? "map" : "weights"}, {"dim", emb.coords.cols()}};
  if (e.method == "pca") {
    meta["explained_variance_ratio"] = emb.explained_variance_ratio;
  } else {
    meta["perplexity"] = e.perplexity;
    meta["iterations"] = e.iterations;
    meta["seed"] = e.seed;
    meta["init"] = e.init == TsneInit::pca ? "pca" : "random";
    meta["initial_objective"] = emb.initial_objective;
    meta["final_objective"] = emb.final_objective;
  }

  const auto groups = trajectories_by(models, "group", {});
  std::vector<svg::PathStyle> paths;
  for (const auto& [name, rows] : groups) {
    svg::PathStyle style{rows, name, {}};
    if (e.kl_line_width && rows.size() >= 2) {
      for (const auto& k : consecutive_kl(*view, rows)) style.segment_weights.push_back(k.estimate.value);
    }
    paths.push_back(std::move(style));
  }
  ctx.out.write_text("embedding.svg", svg::trajectory_plot(emb.coords, paths, e.method + " embedding"));

  if (e.acf && e.method == "pca") {
    CsvTable acf_table({"trajectory", "lag", "acf"});
    json periods = json::object();
    for (const auto& [name, rows] : groups) {
      if (rows.size() < 8) {
        ctx.note("acf: trajectory '" + name + "' has fewer than 8 checkpoints; skipped");
        continue;
      }
      std::vector<double> series;
      for (auto r : rows) series.push_back(emb.coords(static_cast<Eigen::Index>(r), 0));
      const auto acf = autocorrelation(series);
      for (std::size_t l = 0; l < acf.lags.size(); ++l) acf_table.row().add(name).add(acf.lags[l]).add(acf.values[l]);
      const auto sp = spiral_period(acf);
      periods[name] = {{"period_checkpoints", sp.lag ? json(*sp.lag) : json(nullptr)},
                       {"peak_acf", number(sp.peak_value)},
                       {"zero_crossings", acf.zero_crossings},
                       {"reason", sp.reason}};
    }
    ctx.out.write_csv("acf_pc1.csv", acf_table);
    meta["spiral_period"] = periods;
  }
  ctx.out.write_json("embedding.json", meta);
}

// ------------------------------------------------------------------- shift

void run_shift(Context& ctx) {
  const auto& s = *ctx.cfg.shift;
  const auto set = shift_vectors(*ctx.map, s.pairs);
  const std::size_t sample = s.sample_size ? s.sample_size : std::min<std::size_t>(10, set.shifts.size());
  const auto rep = cosine_similarity_report(set, s.n_random, sample, s.seed);
  CsvTable table({"group", "pairs", "mean_cosine"});
  json groups = json::object();
  for (const auto& [name, g] : rep.groups) {
    table.row().add(name).add(g.pairs).add(g.mean);
    groups[name] = {{"mean_cosine", number(g.mean)}, {"pairs", g.pairs}};
  }
  table.row().add("random_baseline").add(rep.n_random).add(rep.random_baseline);
  ctx.out.write_csv("shift_cosines.csv", table);
  ctx.out.write_json("shift.json", {{"groups", groups},
                                    {"random_baseline", number(rep.random_baseline)},
                                    {"n_random", rep.n_random},
                                    {"sample_size", rep.sample_size},
                                    {"skipped_zero_norm", rep.skipped_zero_norm},
                                    {"seed", s.seed}});
}

// ------------------------------------------------------------------- synth

void run_fbm(Context& ctx) {
  const auto& f = *ctx.cfg.fbm;
  CsvTable table({"hurst", "path", "c", "r_squared"});
  json summary = json::array();
  for (std::size_t h = 0; h < f.hurst.size(); ++h) {
    const FbmGenerator gen(f.hurst[h], f.n_steps);
    std::vector<double> cs(f.n_paths), r2(f.n_paths);
    parallel_for(f.n_paths, ctx.threads, [&](std::size_t p) {
      const auto traj = gen.sample(f.dim, f.seed * 1000003 + h * 10007 + p);
      const auto fit = fit_trajectory(traj, traj.steps.front(), FitWindow::all());
      cs[p] = fit.c;
      r2[p] = fit.r_squared;
    });
    for (std::size_t p = 0; p < f.n_paths; ++p) table.row().add(f.hurst[h]).add(p).add(cs[p]).add(r2[p]);
    summary.push_back({{"hurst", f.hurst[h]}, {"expected_c", 2 * f.hurst[h]},
                       {"mean_c", stats::mean(cs)}, {"sd_c", stats::population_sd(cs)},
                       {"paths", f.n_paths}, {"jitter", gen.jitter()}});
  }
  ctx.out.write_csv("synth_fbm.csv", table);
  ctx.out.write_json("synth_fbm.json", {{"n_steps", f.n_steps}, {"dim", f.dim}, {"seed", f.seed}, {"ensembles", summary}});
}

void run_folding(Context& ctx) {
  const auto& f = *ctx.cfg.folding;
  FoldingSpec spec;
  spec.fbm = {0.5, f.n_steps, f.input_dim, f.seed};
  spec.map.alpha = f.alpha;
  spec.map.lambda = f.lambda;
  spec.map.k_max = f.k_max;
  spec.map.input_dim = f.input_dim;
  spec.map.output_dim = f.output_dim;
  spec.map.seed = f.seed;
  spec.kind = f.identity ? FoldingMap::identity : FoldingMap::takagi;
  spec.input_scale = f.input_scale;
  spec.n_paths = f.n_paths;
  spec.threads = ctx.threads;
  const auto res = folding_experiment(spec);
  CsvTable table({"path", "c_w", "c_q", "alpha_hat", "r2_w", "r2_q"});
  std::vector<double> alphas;
  for (std::size_t p = 0; p < res.paths.size(); ++p) {
    const auto& r = res.paths[p];
    table.row().add(p).add(r.c_w).add(r.c_q).add(r.alpha_hat).add(r.r_squared_w).add(r.r_squared_q);
    alphas.push_back(r.alpha_hat);
  }
  ctx.out.write_csv("synth_folding.csv", table);
  ctx.out.write_json("synth_folding.json", {{"map", f.identity ? "identity" : "takagi"},
                                            {"alpha_nominal", f.alpha},
                                            {"c_w", res.c_w}, {"c_q", res.c_q},
                                            {"alpha_hat", res.alpha_hat},
                                            {"alpha_hat_sd", stats::population_sd(alphas)},
                                            {"paths", res.paths.size()},
                                            {"truncation_tail_bound", res.tail_bound},
                                            {"seed", f.seed}});
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  Context ctx(cfg, OutputDir(cfg.output_dir), options.threads, options.log);

  load_inputs(ctx);
  write_ingest_summary(ctx);
  preprocess(ctx);
  if (options.export_matrix && ctx.loglik) {
    const std::string name = *options.export_matrix == Format::csv ? "matrix.csv" : "matrix.mmap";
    save_matrix(*ctx.loglik, ctx.out.path(name), *options.export_matrix);
    ctx.out.record(name);
    ctx.out.record("matrix.meta.json");
  }
  center(ctx);

  if (cfg.kl) run_kl(ctx);
  if (cfg.summarize) run_summarize(ctx);
  if (cfg.checkpoint_scan) run_checkpoint_scan(ctx);
  if (cfg.seed_scan) run_seed_scan(ctx);
  if (cfg.scaling) run_scaling(ctx);
  if (cfg.embed) run_embed(ctx);
  if (cfg.shift) run_shift(ctx);
  if (cfg.fbm) run_fbm(ctx);
  if (cfg.folding) run_folding(ctx);

  json manifest{{"tool", "modelmap"},
                {"version", MODELMAP_VERSION},
                {"command", options.command},
                {"inputs", ctx.inputs},
                {"warnings", ctx.warnings}};
  if (options.config_path) {
    manifest["config"] = {{"path", options.config_path->string()}, {"sha256", sha256_file(*options.config_path)}};
  }
  ctx.out.write_manifest(manifest);

  RunResult result;
  result.output_dir = cfg.output_dir;
  result.files = ctx.out.files();
  for (const auto& w : ctx.warnings) result.warnings.push_back(w.get<std::string>());
  return result;
}

}  // namespace modelmap::cli
