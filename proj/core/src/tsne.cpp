#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "modelmap/embed.hpp"
#include "modelmap/error.hpp"

namespace modelmap {

namespace {

constexpr double kMinProbability = 1e-12;

/// Conditional row for precision beta; returns entropy in bits.
double conditional_row(const Matrix& d, Eigen::Index i, double beta, double d_min,
                       Eigen::Ref<Eigen::RowVectorXd> row) {
  double z = 0.0;
  double weighted = 0.0;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    if (j == i) {
      row(j) = 0.0;
      continue;
    }
    const double shifted = d(i, j) - d_min;
    const double w = std::exp(-beta * shifted);
    row(j) = w;
    z += w;
    weighted += w * shifted;
  }
  row /= z;
  // H = log Z + beta <d>, in nats, with the shift cancelling.
  const double h_nats = std::log(z) + beta * weighted / z;
  return h_nats / std::numbers::ln2;
}

void check_tsne_input(const Matrix& d, const TsneParams& p) {
  const auto k = d.rows();
  if (d.cols() != k) throw AnalysisError("t-SNE: distance matrix must be square");
  if (k < 4) throw AnalysisError("t-SNE needs at least 4 points");
  if (p.dim != 2 && p.dim != 3) throw AnalysisError("t-SNE dimension must be 2 or 3");
  if (!(p.perplexity > 0.0) || !(p.perplexity < static_cast<double>(k - 1) / 3.0)) {
    throw AnalysisError("t-SNE perplexity " + std::to_string(p.perplexity) +
                        " infeasible for " + std::to_string(k) + " points (need < (K-1)/3)");
  }
  if (!d.allFinite()) throw AnalysisError("t-SNE: non-finite distances");
}

Matrix classical_scaling(const Matrix& sq_distances, int dim) {
  // -1/2 J D^2 J, then leading eigenvectors scaled by sqrt(eigenvalue).
  const auto k = sq_distances.rows();
  Eigen::MatrixXd b = -0.5 * sq_distances;
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const Eigen::RowVectorXd col_mean = b.colwise().mean();
  const double grand = b.mean();
  b.colwise() -= row_mean;
  b.rowwise() -= col_mean;
  b.array() += grand;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  Matrix y(k, dim);
  for (int c = 0; c < dim; ++c) {
    const Eigen::Index idx = k - 1 - c;
    const double l = std::max(eig.eigenvalues()(idx), 0.0);
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    y.col(c) = v * std::sqrt(l);
  }
  return y;
}

Matrix initial_embedding(const Matrix& sq_distances, const TsneParams& p) {
  const auto k = sq_distances.rows();
  Matrix y(k, p.dim);
  if (p.init == TsneInit::pca) {
    y = classical_scaling(sq_distances, p.dim);
    const double sd = std::sqrt((y.col(0).array() - y.col(0).mean()).square().mean());
    if (sd > 0.0 && y.allFinite()) {
      y *= 1e-4 / sd;
      return y;
    }
  }
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (int c = 0; c < p.dim; ++c) y(i, c) = normal(rng);
  }
  return y;
}

Embedding run_tsne(const Matrix& sq_distances, const TsneParams& p) {
  check_tsne_input(sq_distances, p);
  const auto k = sq_distances.rows();
  const auto aff = tsne_affinities(sq_distances, p.perplexity, p.entropy_tolerance);

  Embedding e;
  e.method = "tsne";
  e.params = p;
  const double lr = p.learning_rate.value_or(
      std::clamp(static_cast<double>(k) / 12.0, 50.0, 500.0));

  Matrix y = initial_embedding(sq_distances, p);
  Matrix update = Matrix::Zero(k, p.dim);
  Matrix gains = Matrix::Ones(k, p.dim);
  e.initial_objective = tsne_objective(aff.joint, y);
  e.objective_history.emplace_back(0, e.initial_objective);

  const Matrix exaggerated = aff.joint * p.early_exaggeration;
  for (std::size_t it = 0; it < p.iterations; ++it) {
    const bool early = it < p.exaggeration_iterations;
    const Matrix grad = tsne_gradient(early ? exaggerated : aff.joint, y);
    const double momentum = it < p.momentum_switch ? p.momentum_initial : p.momentum_final;
    for (Eigen::Index i = 0; i < k; ++i) {
      for (int c = 0; c < p.dim; ++c) {
        double& g = gains(i, c);
        g = (grad(i, c) > 0.0) != (update(i, c) > 0.0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        update(i, c) = momentum * update(i, c) - lr * g * grad(i, c);
      }
    }
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (p.objective_every > 0 && (it + 1) % p.objective_every == 0) {
      e.objective_history.emplace_back(it + 1, tsne_objective(aff.joint, y));
    }
  }
  e.final_objective = tsne_objective(aff.joint, y);
  if (e.objective_history.back().first != p.iterations) {
    e.objective_history.emplace_back(p.iterations, e.final_objective);
  }
  e.coords = std::move(y);
  return e;
}

}  // namespace

TsneAffinities tsne_affinities(const Matrix& sq_distances, double perplexity,
                               double entropy_tolerance) {
  const auto k = sq_distances.rows();
  const double target = std::log2(perplexity);
  TsneAffinities out;
  out.conditional = Matrix::Zero(k, k);
  out.row_entropy_bits.resize(static_cast<std::size_t>(k));
  out.beta.resize(static_cast<std::size_t>(k));

  for (Eigen::Index i = 0; i < k; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) d_min = std::min(d_min, sq_distances(i, j));
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    Eigen::RowVectorXd row(k);
    double h = conditional_row(sq_distances, i, beta, d_min, row);
    for (int iter = 0; iter < 200 && std::abs(h - target) > entropy_tolerance; ++iter) {
      if (h > target) {  // too flat: sharpen
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = conditional_row(sq_distances, i, beta, d_min, row);
    }
    out.conditional.row(i) = row;
    out.row_entropy_bits[static_cast<std::size_t>(i)] = h;
    out.beta[static_cast<std::size_t>(i)] = beta;
  }

  out.joint = (out.conditional + out.conditional.transpose()) / (2.0 * static_cast<double>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      out.joint(i, j) = i == j ? 0.0 : std::max(out.joint(i, j), kMinProbability);
    }
  }
  out.joint /= out.joint.sum();
  return out;
}

double tsne_objective(const Matrix& joint, const Matrix& y) {
  const auto k = y.rows();
  double z = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) z += 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    }
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j || joint(i, j) <= 0.0) continue;
      const double q = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm()) / z;
      kl += joint(i, j) * std::log(joint(i, j) / q);
    }
  }
  return kl;
}

Matrix tsne_gradient(const Matrix& joint, const Matrix& y) {
  const auto k = y.rows();
  Matrix w(k, k);
  double z = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    w(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      w(i, j) = w(j, i) = v;
      z += 2.0 * v;
    }
  }
  // Scale-aware form: works for exaggerated P whose total is not 1.
  const double p_total = joint.sum();
  Matrix grad = Matrix::Zero(k, y.cols());
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double coeff = (joint(i, j) - p_total * w(i, j) / z) * w(i, j);
      grad.row(i) += 4.0 * coeff * (y.row(i) - y.row(j));
    }
  }
  return grad;
}

Embedding tsne_from_coords(const Matrix& coords, const TsneParams& params) {
  if (!coords.allFinite()) throw AnalysisError("t-SNE: non-finite coordinates");
  return run_tsne(pairwise_sq_distances(coords), params);
}

Embedding tsne_from_distances(const Matrix& distances, const TsneParams& params) {
  if (!distances.allFinite()) throw DataError("t-SNE: non-finite distances");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + distances.cwiseAbs().maxCoeff())) {
    throw DataError("t-SNE: distance matrix is not symmetric");
  }
  return run_tsne(distances.cwiseProduct(distances), params);
}

}  // namespace modelmap
