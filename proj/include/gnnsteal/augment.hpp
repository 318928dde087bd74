#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/rng.hpp"
#include "gnnsteal/spectral.hpp"

namespace gnnsteal {

/// Appendix-B augmentation constants. Role assignment (the source defers the
/// details to the cited spectral-augmentation work): epsilon is the
/// margin-improvement stopping tolerance, eta the gradient step size, omega
/// the Frobenius budget on the perturbation, iters the outer round count.
struct AugmentConfig {
  double feature_mask_prob = 0.5;  // p1
  double edge_drop_prob = 0.1;     // p2
  double epsilon = 0.01;
  double eta = 1.0;
  double omega = 20.0;
  int iters = 3;
  std::uint64_t seed = 0;
  double perturb_magnitude = 0.1;  // edge-perturbation weights ~ U[-0.1, 0.1]

  void validate() const {
    if (feature_mask_prob < 0 || feature_mask_prob > 1 || edge_drop_prob < 0 ||
        edge_drop_prob > 1)
      throw ValidationError("augment config: probabilities must lie in [0,1]");
    if (epsilon <= 0 || eta <= 0 || omega <= 0 || iters <= 0)
      throw ValidationError("augment config: epsilon, eta, omega, iters must be positive");
  }
};

/// A perturbed view of a graph: weighted adjacency A' with entries in [-1,1]
/// (symmetric) and a masked feature matrix X'. `provenance` records applied
/// transforms and seeds for experiment reproducibility.
struct AugmentedView {
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd features;
  nlohmann::json provenance = nlohmann::json::array();
};

/// Splits the spectrum at index ⌊N/2⌋: the low band holds the amplitudes of
/// the first ⌊N/2⌋ eigenvalues (λ ∈ [0,1] under the λ_N ≈ 2 convention), the
/// high band the remainder.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> band_amplitudes(
    const SpectralDecomposition& decomp) {
  const auto n = decomp.eigenvalues.size();
  const auto lo = n / 2;
  Eigen::VectorXd amps = decomp.amplitudes();
  return {amps.head(lo), amps.tail(n - lo)};
}

struct PairReport {
  bool optimal = false;
  double margin = 0.0;    // min high-band diff − max low-band diff
  double min_high = 0.0;
  double max_low = 0.0;
};

namespace detail {

inline PairReport pair_report_from_spectra(const Eigen::VectorXd& a,
                                           const Eigen::VectorXd& b) {
  const auto n = a.size();
  const auto lo = n / 2;
  PairReport rep;
  rep.max_low = lo > 0 ? (a.head(lo) - b.head(lo)).cwiseAbs().maxCoeff() : 0.0;
  rep.min_high = (a.tail(n - lo) - b.tail(n - lo)).cwiseAbs().minCoeff();
  rep.margin = rep.min_high - rep.max_low;
  rep.optimal = rep.min_high > rep.max_low;
  return rep;
}

}  // namespace detail

/// Optimal-contrastive-pair test: true iff every high-band amplitude
/// difference exceeds every low-band one, evaluated at matched sorted
/// eigen-indices of the two normalized-Laplacian spectra.
inline PairReport is_optimal_pair(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_prime) {
  if (a.rows() != a_prime.rows() || a.cols() != a_prime.cols())
    throw ValidationError("is_optimal_pair: dimension mismatch");
  auto da = eigendecompose(normalized_laplacian(a));
  auto db = eigendecompose(normalized_laplacian(a_prime));
  return detail::pair_report_from_spectra(da.amplitudes(), db.amplitudes());
}

/// Spectral adjacency transform. Initializes the perturbation with the
/// degree-preserving shrinkage Δ = f·(D − A), f = min(0.3, 0.9/d_max): the
/// normalized-Laplacian spectrum becomes exactly (1−f)·λ, so every amplitude
/// difference is f·λ — strictly larger on the high band than the low band
/// whenever the spectrum is simple at the band boundary. Then, for up to
/// `iters` outer rounds, takes η-scaled projected-gradient steps (backtracking
/// on the step length) on the entry-wise Δ along the soft-margin ascent
/// direction — raising high-band amplitude differences, lowering low-band
/// ones — recomputing the spectrum each round, keeping ‖Δ‖_F ≤ Ω, and
/// stopping early when the margin improves by less than ε. Finally
/// A' = clip(A + Δ) for the best margin seen.
///
/// The gradient is exact for the |·|-degree normalized Laplacian:
///   ∂λ_k/∂A_ij = −2 u_ki u_kj/√(d_i d_j)
///              + sign(A_ij)·[(1−λ_k)(u_ki²/d_i + u_kj²/d_j)]
/// (symmetric pair, subgradient 0 at zero entries).
///
/// Throws AugmentError (carrying the best margin) if no positive margin is
/// reached — e.g. when the boundary eigenvalue is exactly degenerate, as for
/// unions of identical cliques; callers fall back to classical augmentations.
inline AugmentedView spectral_augment(const Graph& graph, const AugmentConfig& cfg) {
  cfg.validate();
  if (graph.n < 2 || graph.edges.empty())
    throw ValidationError("spectral_augment: need n >= 2 and at least one edge");
  const int n = graph.n;
  const Eigen::MatrixXd a = graph.dense_adjacency();
  const Eigen::VectorXd lam_ref = eigendecompose(normalized_laplacian(a)).amplitudes();
  const auto lo = lam_ref.size() / 2;

  auto clip_view = [&](const Eigen::MatrixXd& d) {
    return (a + d).cwiseMax(-1.0).cwiseMin(1.0).eval();
  };
  auto project = [&](Eigen::MatrixXd& d) {
    double norm = d.norm();
    if (norm > cfg.omega) d *= cfg.omega / norm;
  };
  auto margin_of = [&](const Eigen::VectorXd& amp) {
    Eigen::VectorXd dd = (amp - lam_ref).cwiseAbs();
    double max_low = lo > 0 ? dd.head(lo).maxCoeff() : 0.0;
    return dd.tail(dd.size() - lo).minCoeff() - max_low;
  };

  Eigen::VectorXd deg0 = a.cwiseAbs().rowwise().sum();
  double f = std::min(0.3, 0.9 / std::max(1.0, deg0.maxCoeff()));
  Eigen::MatrixXd delta = -f * a;
  delta.diagonal() = f * deg0;
  project(delta);

  nlohmann::json rounds = nlohmann::json::array();
  Eigen::MatrixXd best_delta = delta;
  double best_margin = margin_of(eigendecompose(normalized_laplacian(clip_view(delta)))
                                     .amplitudes());
  rounds.push_back({{"round", 0}, {"margin", best_margin}, {"deltaFrobenius", delta.norm()}});
  double prev_margin = best_margin;

  const double soft_temp = 0.005;
  for (int round = 1; round <= cfg.iters; ++round) {
    Eigen::MatrixXd ap = clip_view(delta);
    auto dec = eigendecompose(normalized_laplacian(ap));
    Eigen::VectorXd amp = dec.amplitudes();
    Eigen::VectorXd dd = (amp - lam_ref).cwiseAbs();

    // soft-margin weights: softmin over the high band, softmax over the low
    Eigen::VectorXd coef(n);
    {
      double hi_min = dd.tail(n - lo).minCoeff();
      double lw_max = lo > 0 ? dd.head(lo).maxCoeff() : 0.0;
      double hi_sum = 0.0, lw_sum = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k >= lo) {
          coef(k) = std::exp(-(dd(k) - hi_min) / soft_temp);
          hi_sum += coef(k);
        } else {
          coef(k) = std::exp((dd(k) - lw_max) / soft_temp);
          lw_sum += coef(k);
        }
      }
      for (int k = 0; k < n; ++k) {
        double band_w = k >= static_cast<int>(lo) ? coef(k) / hi_sum : -coef(k) / lw_sum;
        double diff = amp(k) - lam_ref(k);
        double s = diff >= 0.0 ? 1.0 : -1.0;
        double s_amp = dec.eigenvalues(k) >= 0.0 ? 1.0 : -1.0;
        coef(k) = band_w * s * s_amp;
      }
    }
    Eigen::VectorXd deg = ap.cwiseAbs().rowwise().sum();
    Eigen::VectorXd inv_sqrt(n), inv(n);
    for (int i = 0; i < n; ++i) {
      inv_sqrt(i) = deg(i) > 0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
      inv(i) = deg(i) > 0 ? 1.0 / deg(i) : 0.0;
    }
    Eigen::MatrixXd grad =
        -2.0 * (inv_sqrt.asDiagonal() *
                (dec.eigenvectors * coef.asDiagonal() * dec.eigenvectors.transpose()) *
                inv_sqrt.asDiagonal());
    Eigen::VectorXd t = (dec.eigenvectors.array().square().matrix() *
                         (coef.array() * (1.0 - dec.eigenvalues.array())).matrix().eval());
    t = t.cwiseProduct(inv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && ap(i, j) != 0.0)
          grad(i, j) += (ap(i, j) > 0 ? 1.0 : -1.0) * (t(i) + t(j));
    grad.diagonal().setZero();
    grad = ((grad + grad.transpose()) * 0.5).eval();
    double gnorm = grad.norm();
    if (gnorm <= 0.0) break;
    grad /= gnorm;

    double cur_margin = margin_of(amp);
    bool improved = false;
    double new_margin = cur_margin;
    for (int b = 0; b < 6; ++b) {
      double step = cfg.eta / std::pow(4.0, b);
      Eigen::MatrixXd cand = delta + step * grad;
      project(cand);
      double mc = margin_of(
          eigendecompose(normalized_laplacian(clip_view(cand))).amplitudes());
      if (mc > cur_margin) {
        delta = std::move(cand);
        new_margin = mc;
        improved = true;
        break;
      }
    }
    rounds.push_back(
        {{"round", round}, {"margin", new_margin}, {"deltaFrobenius", delta.norm()}});
    if (!improved) break;
    if (new_margin > best_margin) {
      best_margin = new_margin;
      best_delta = delta;
    }
    if (new_margin - prev_margin < cfg.epsilon) break;
    prev_margin = new_margin;
  }

  if (best_margin <= 0.0)
    throw AugmentError("spectral_augment: no positive optimal-pair margin after " +
                           std::to_string(cfg.iters) + " rounds (best " +
                           std::to_string(best_margin) + ")",
                       best_margin);

  AugmentedView view;
  view.adjacency = clip_view(best_delta);
  view.features = graph.features;
  view.provenance.push_back({{"transform", "spectral"},
                             {"seed", cfg.seed},
                             {"shrinkFactor", f},
                             {"margin", best_margin},
                             {"rounds", rounds}});
  return view;
}

/// Classical augmentations on an existing view, seeded:
///  (a) feature masking — each (node, feature) entry zeroed with prob p1;
///  (b) edge dropping  — each nonzero off-diagonal pair zeroed with prob p2;
///  (c) edge perturbation — one new symmetric weight ~ U[-0.1, 0.1] at a
///      random zero pair per dropped edge.
inline AugmentedView classical_augment(const AugmentedView& view,
                                       const Eigen::MatrixXd& features,
                                       const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n = static_cast<int>(view.adjacency.rows());
  AugmentedView out = view;
  out.features = features;

  Rng mask_rng(mix_seed(seed, "feature-mask"));
  if (cfg.feature_mask_prob > 0) {
    for (Eigen::Index i = 0; i < out.features.rows(); ++i)
      for (Eigen::Index j = 0; j < out.features.cols(); ++j)
        if (mask_rng.bernoulli(cfg.feature_mask_prob)) out.features(i, j) = 0.0;
  }

  Rng drop_rng(mix_seed(seed, "edge-drop"));
  long dropped = 0;
  if (cfg.edge_drop_prob > 0) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (out.adjacency(i, j) != 0.0 && drop_rng.bernoulli(cfg.edge_drop_prob)) {
          out.adjacency(i, j) = out.adjacency(j, i) = 0.0;
          ++dropped;
        }
      }
    }
  }

  Rng perturb_rng(mix_seed(seed, "edge-perturb"));
  long added = 0;
  for (long t = 0; t < dropped; ++t) {
    // rejection-sample a zero off-diagonal pair; density is low desk-scale
    for (int attempt = 0; attempt < 64; ++attempt) {
      int i = static_cast<int>(perturb_rng.index(n));
      int j = static_cast<int>(perturb_rng.index(n));
      if (i == j || out.adjacency(i, j) != 0.0) continue;
      double w = perturb_rng.uniform(-cfg.perturb_magnitude, cfg.perturb_magnitude);
      out.adjacency(i, j) = out.adjacency(j, i) = w;
      ++added;
      break;
    }
  }

  out.provenance.push_back({{"transform", "classical"},
                            {"seed", seed},
                            {"featureMaskProb", cfg.feature_mask_prob},
                            {"edgeDropProb", cfg.edge_drop_prob},
                            {"edgesDropped", dropped},
                            {"edgesPerturbed", added}});
  return out;
}

/// Identity view of a graph (A as dense weights, X untouched).
inline AugmentedView identity_view(const Graph& g) {
  AugmentedView v;
  v.adjacency = g.dense_adjacency();
  v.features = g.features;
  return v;
}

}  // namespace gnnsteal
