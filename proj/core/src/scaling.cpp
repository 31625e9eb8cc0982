#include "modelmap/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modelmap/error.hpp"
#include "modelmap/parallel.hpp"
#include "modelmap/stats.hpp"

namespace modelmap {

const char* to_string(Space s) {
  switch (s) {
    case Space::weights: return "weights";
    case Space::loglik_map: return "loglik_map";
    case Space::exp_map: return "exp_map";
  }
  return "unknown";
}

void Trajectory::validate() const {
  if (steps.size() != static_cast<std::size_t>(points.rows())) {
    throw DataError("trajectory: " + std::to_string(steps.size()) + " steps but " +
                    std::to_string(points.rows()) + " points");
  }
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i] <= steps[i - 1]) throw DataError("trajectory steps must be strictly increasing");
  }
}

std::optional<std::size_t> Trajectory::index_of(std::int64_t step) const {
  const auto it = std::lower_bound(steps.begin(), steps.end(), step);
  if (it == steps.end() || *it != step) return std::nullopt;
  return static_cast<std::size_t>(it - steps.begin());
}

Trajectory Trajectory::restrict_to(std::span<const std::int64_t> keep) const {
  Trajectory out;
  out.space = space;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), points.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto idx = index_of(keep[i]);
    if (!idx) throw DataError("step " + std::to_string(keep[i]) + " not in trajectory");
    out.steps.push_back(keep[i]);
    out.points.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(*idx));
  }
  out.validate();
  return out;
}

Trajectory make_trajectory(const Matrix& rows, const std::vector<ModelMeta>& models, Space space) {
  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t r : order) {
    if (!models[r].step) throw DataError("model '" + models[r].id + "' has no training step");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *models[a].step < *models[b].step; });
  Trajectory t;
  t.space = space;
  t.points.resize(static_cast<Eigen::Index>(order.size()), rows.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    t.steps.push_back(*models[order[i]].step);
    t.points.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(order[i]));
  }
  t.validate();
  return t;
}

namespace {

template <typename M>
std::pair<Matrix, std::vector<ModelMeta>> pick(const M& values, const std::vector<ModelMeta>& models,
                                               const std::vector<std::size_t>& rows) {
  if (rows.empty()) return {values, models};
  Matrix out(static_cast<Eigen::Index>(rows.size()), values.cols());
  std::vector<ModelMeta> meta;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows.at(i)));
    meta.push_back(models.at(rows[i]));
  }
  return {std::move(out), std::move(meta)};
}

}  // namespace

Trajectory make_trajectory(const CenteredMap& c, const std::vector<std::size_t>& rows) {
  auto [values, meta] = pick(c.coords(), c.models(), rows);
  return make_trajectory(values, meta, Space::loglik_map);
}

Trajectory make_trajectory(const LogLikelihoodMatrix& m, Space space) {
  return make_trajectory(m.values(), m.models(), space);
}

Trajectory make_trajectory(const ExpMap& e, const std::vector<std::size_t>& rows) {
  auto [values, meta] = pick(e.values, e.models, rows);
  return make_trajectory(values, meta, Space::exp_map);
}

std::vector<Displacement> squared_displacement(const Trajectory& traj, std::int64_t t0,
                                               const FitWindow& window) {
  traj.validate();
  const auto start = traj.index_of(t0);
  if (!start) throw AnalysisError("t0 = " + std::to_string(t0) + " is not a trajectory step");
  std::vector<Displacement> out;
  const auto origin = traj.points.row(static_cast<Eigen::Index>(*start));
  for (std::size_t i = *start + 1; i < traj.steps.size(); ++i) {
    const std::int64_t lag = traj.steps[i] - t0;
    if (window.span_steps) {
      if (lag > *window.span_steps) break;
    } else if (out.size() >= window.checkpoints) {
      break;
    }
    const double d = (traj.points.row(static_cast<Eigen::Index>(i)) - origin).squaredNorm();
    out.push_back({static_cast<double>(lag), d});
  }
  if (out.size() < 3) {
    throw AnalysisError("fewer than 3 checkpoints after t0 = " + std::to_string(t0) +
                        " within the window");
  }
  return out;
}

ScalingFit fit_exponent(std::span<const Displacement> pairs) {
  std::vector<double> x, y;
  ScalingFit fit;
  for (const auto& p : pairs) {
    if (!(p.lag > 0.0)) throw AnalysisError("lags must be positive");
    if (!(p.sq_distance > 0.0)) {
      ++fit.dropped_nonpositive;
      continue;
    }
    x.push_back(std::log(p.lag));
    y.push_back(std::log(p.sq_distance));
    fit.window = std::max<std::int64_t>(fit.window, static_cast<std::int64_t>(p.lag));
  }
  if (x.empty()) throw AnalysisError("all displacements are zero");
  if (x.size() < 3) {
    throw AnalysisError("only " + std::to_string(x.size()) +
                        " positive displacements (need 3); " +
                        std::to_string(fit.dropped_nonpositive) + " dropped");
  }
  const auto lf = stats::least_squares(x, y);
  fit.c = lf.slope;
  fit.log_intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.n_points = x.size();
  return fit;
}

ScalingFit fit_trajectory(const Trajectory& traj, std::int64_t t0, const FitWindow& window) {
  const auto pairs = squared_displacement(traj, t0, window);
  ScalingFit fit = fit_exponent(pairs);
  fit.t0 = t0;
  return fit;
}

std::pair<double, double> ExponentSweep::r_squared_summary() const {
  std::vector<double> r2;
  for (const auto& e : entries) {
    if (e.fit) r2.push_back(e.fit->r_squared);
  }
  if (r2.empty()) return {0.0, 0.0};
  return {stats::mean(r2), stats::population_sd(r2)};
}

ExponentSweep exponent_sweep(const Trajectory& traj, std::span<const std::int64_t> t0_grid,
                             const FitWindow& window, unsigned threads) {
  for (std::size_t i = 1; i < t0_grid.size(); ++i) {
    if (t0_grid[i] <= t0_grid[i - 1]) throw AnalysisError("t0 grid must be increasing");
  }
  ExponentSweep sweep;
  sweep.space = traj.space;
  sweep.entries.resize(t0_grid.size());
  auto work = [&](std::size_t i) {
    auto& e = sweep.entries[i];
    e.t0 = t0_grid[i];
    try {
      e.fit = fit_trajectory(traj, e.t0, window);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
  };
  parallel_for(t0_grid.size(), threads, work);
  return sweep;
}

double holder_exponent(double c_w, double c_q) {
  if (!(c_w > 0.0)) throw AnalysisError("Hölder exponent needs c_w > 0");
  return c_q / c_w;
}

double holder_exponent(const ScalingFit& fit_w, const ScalingFit& fit_q) {
  return holder_exponent(fit_w.c, fit_q.c);
}

FractalDimension fractal_dimension(double c) {
  if (!(c > 0.0)) throw AnalysisError("fractal dimension needs c > 0");
  return {2.0 / c, c / 2.0};
}

SpaceComparison compare_spaces(const Trajectory& traj_w, const Trajectory& traj_q,
                               const Trajectory* traj_exp_q, std::int64_t t0,
                               const FitWindow& window) {
  std::vector<std::int64_t> common;
  std::set_intersection(traj_w.steps.begin(), traj_w.steps.end(), traj_q.steps.begin(),
                        traj_q.steps.end(), std::back_inserter(common));
  if (traj_exp_q) {
    std::vector<std::int64_t> tmp;
    std::set_intersection(common.begin(), common.end(), traj_exp_q->steps.begin(),
                          traj_exp_q->steps.end(), std::back_inserter(tmp));
    common = std::move(tmp);
  }
  SpaceComparison row;
  row.fit_w = fit_trajectory(traj_w.restrict_to(common), t0, window);
  row.fit_q = fit_trajectory(traj_q.restrict_to(common), t0, window);
  row.c_w = row.fit_w.c;
  row.c_q = row.fit_q.c;
  row.alpha = holder_exponent(row.c_w, row.c_q);
  if (traj_exp_q) {
    row.fit_exp_q = fit_trajectory(traj_exp_q->restrict_to(common), t0, window);
    row.c_exp_q = row.fit_exp_q->c;
    row.diff = *row.c_exp_q - row.c_q;
  }
  return row;
}

}  // namespace modelmap
