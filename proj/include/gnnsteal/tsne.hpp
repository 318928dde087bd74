#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <optional>
#include <vector>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/rng.hpp"

namespace gnnsteal {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
  int exaggeration_iters = 100;
  double exaggeration = 4.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  /// Inputs with dim >= pca_threshold are PCA-reduced to pca_dims first.
  int pca_threshold = 64;
  int pca_dims = 50;
  /// Optional fixed initial embedding (m×2); overrides the seeded Gaussian init.
  std::optional<Eigen::MatrixXd> init;
};

struct TsneResult {
  Eigen::MatrixXd embedding;       // m × 2, centered at the origin
  std::vector<double> kl_curve;    // KL(P ‖ Q) per iteration (true P, no exaggeration)
};

namespace detail {

inline Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& x, int dims) {
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const auto d = cov.rows();
  dims = std::min<int>(dims, static_cast<int>(d));
  Eigen::MatrixXd basis(d, dims);
  for (int j = 0; j < dims; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - j);  // descending variance
    // deterministic sign: largest-magnitude component positive
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    basis.col(j) = v;
  }
  return centered * basis;
}

/// Conditional affinities p_{j|i} with per-point bandwidth found by bisection
/// on the Shannon entropy: H(P_i) = log(perplexity).
inline Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& d2, double perplexity) {
  const auto m = d2.rows();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
  const double target_entropy = std::log(perplexity);
  for (Eigen::Index i = 0; i < m; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    Eigen::VectorXd row;
    for (int it = 0; it < 64; ++it) {
      row = (-beta * d2.row(i)).array().exp();
      row(i) = 0.0;
      double sum = row.sum();
      if (sum <= 0) {
        beta /= 2.0;
        beta_hi = beta * 2.0;
        continue;
      }
      row /= sum;
      double entropy = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (row(j) > 1e-300) entropy -= row(j) * std::log(row(j));
      double diff = entropy - target_entropy;
      if (std::abs(diff) < 1e-7) break;
      if (diff > 0) {  // entropy too high -> sharpen
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = (beta + beta_lo) / 2.0;
      }
    }
    p.row(i) = row;
  }
  return p;
}

}  // namespace detail

/// Exact (non-approximate) t-SNE to 2-D: Gaussian affinities with
/// perplexity-calibrated bandwidths, symmetrized, then KL minimized by
/// momentum gradient descent with per-entry gains and early exaggeration.
/// O(m²) per iteration.
inline TsneResult tsne_project(const Eigen::MatrixXd& input, const TsneOptions& opt = {}) {
  const auto m = input.rows();
  if (static_cast<double>(m) <= 3.0 * opt.perplexity)
    throw ValidationError("tsne_project: need m > 3*perplexity (m=" + std::to_string(m) +
                          ", perplexity=" + std::to_string(opt.perplexity) + ")");
  Eigen::MatrixXd x = input;
  if (x.cols() >= opt.pca_threshold) x = detail::pca_reduce(x, opt.pca_dims);

  // pairwise squared distances
  Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, m) + sq.transpose().replicate(m, 1) -
                       2.0 * x * x.transpose();
  d2 = d2.cwiseMax(0.0);

  Eigen::MatrixXd pc = detail::conditional_affinities(d2, opt.perplexity);
  Eigen::MatrixXd p = (pc + pc.transpose()) / (2.0 * static_cast<double>(m));
  p = p.cwiseMax(1e-12);

  Eigen::MatrixXd y(m, 2);
  if (opt.init) {
    if (opt.init->rows() != m || opt.init->cols() != 2)
      throw ValidationError("tsne_project: init must be m x 2");
    y = *opt.init;
  } else {
    Rng rng(mix_seed(opt.seed, "tsne-init"));
    for (Eigen::Index i = 0; i < m; ++i)
      for (int j = 0; j < 2; ++j) y(i, j) = rng.normal(0.0, 1e-2);
  }

  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(m, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(m, 2);
  TsneResult result;
  result.kl_curve.reserve(opt.iterations);

  for (int iter = 0; iter < opt.iterations; ++iter) {
    double exag = iter < opt.exaggeration_iters ? opt.exaggeration : 1.0;
    // low-dimensional affinities (Student-t kernel)
    Eigen::VectorXd ysq = y.rowwise().squaredNorm();
    Eigen::MatrixXd num = (ysq.replicate(1, m) + ysq.transpose().replicate(m, 1) -
                           2.0 * y * y.transpose());
    num = (1.0 + num.array()).inverse().matrix();
    for (Eigen::Index i = 0; i < m; ++i) num(i, i) = 0.0;
    double z = num.sum();
    Eigen::MatrixXd q = (num / std::max(z, 1e-300)).cwiseMax(1e-12);

    // gradient: 4 Σ_j (exag·p_ij − q_ij) (y_i − y_j) / (1 + |y_i−y_j|²)
    Eigen::MatrixXd w = (exag * p - q).cwiseProduct(num);
    Eigen::VectorXd wsum = w.rowwise().sum();
    Eigen::MatrixXd grad = 4.0 * (wsum.asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < m; ++i) {
      for (int j = 0; j < 2; ++j) {
        bool same_sign = (grad(i, j) > 0.0) == (dy(i, j) > 0.0);
        gains(i, j) = same_sign ? std::max(gains(i, j) * 0.8, 0.01) : gains(i, j) + 0.2;
      }
    }
    double momentum = iter < opt.momentum_switch_iter ? opt.initial_momentum
                                                      : opt.final_momentum;
    dy = momentum * dy - opt.learning_rate * gains.cwiseProduct(grad);
    y += dy;
    y.rowwise() -= y.colwise().mean();  // keep centered

    double kl = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        if (i != j) kl += p(i, j) * std::log(p(i, j) / q(i, j));
    result.kl_curve.push_back(kl);
  }
  result.embedding = y;
  return result;
}

}  // namespace gnnsteal
