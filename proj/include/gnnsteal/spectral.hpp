#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/graph.hpp"

namespace gnnsteal {

/// Eigen-decomposition U Λ Uᵀ of a symmetric matrix, eigenvalues ascending.
/// `amplitudes` holds the spectrum φ at matched sorted indices; for the
/// normalized Laplacian convention used throughout, φ(λ_i) is the eigenvalue
/// magnitude itself.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  Eigen::VectorXd amplitudes() const { return eigenvalues.cwiseAbs(); }
};

/// Symmetric normalized Laplacian of a (possibly weighted, possibly signed)
/// dense adjacency: L = I − D^{−1/2} A D^{−1/2} with degrees d_i = Σ_j |A_ij|.
/// Isolated nodes (zero degree) get row/col 0, keeping the spectrum in [0, 2].
inline Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& A) {
  const auto n = A.rows();
  if (A.cols() != n) throw ValidationError("normalized_laplacian: matrix not square");
  Eigen::VectorXd deg = A.cwiseAbs().rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal());
  for (Eigen::Index i = 0; i < n; ++i) L(i, i) = deg(i) > 0.0 ? 1.0 + L(i, i) : 0.0;
  // force exact symmetry against rounding
  L = ((L + L.transpose()) * 0.5).eval();
  return L;
}

inline Eigen::MatrixXd normalized_laplacian(const Graph& g) {
  return normalized_laplacian(g.dense_adjacency());
}

/// Dense exact eigendecomposition; O(n³), intended for desk-scale n ≲ 5000.
inline SpectralDecomposition eigendecompose(const Eigen::MatrixXd& M) {
  const auto n = M.rows();
  if (M.cols() != n) throw ValidationError("eigendecompose: matrix not square");
  double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8)
    throw ValidationError("eigendecompose: input not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
  if (solver.info() != Eigen::Success)
    throw Error("eigendecompose: eigensolver failed to converge");
  SpectralDecomposition out;
  out.eigenvalues = solver.eigenvalues();   // ascending
  out.eigenvectors = solver.eigenvectors(); // orthonormal columns
  return out;
}

inline SpectralDecomposition spectral_decomposition(const Graph& g) {
  return eigendecompose(normalized_laplacian(g));
}

}  // namespace gnnsteal
