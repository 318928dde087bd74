#include <catch2/catch_amalgamated.hpp>

#include "gnnsteal/graph.hpp"
#include "gnnsteal/spectral.hpp"

using namespace gnnsteal;
using Catch::Approx;

namespace {

Graph complete_graph(int n) {
  Graph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
  g.features = Eigen::MatrixXd::Identity(n, n);
  g.labels.assign(n, 0);
  g.num_classes = 1;
  return g;
}

}  // namespace

TEST_CASE("K2 spectrum is {0, 2}", "[spectral]") {
  auto dec = spectral_decomposition(complete_graph(2));
  CHECK(dec.eigenvalues(0) == Approx(0.0).margin(1e-12));
  CHECK(dec.eigenvalues(1) == Approx(2.0).margin(1e-12));
}

TEST_CASE("K3 spectrum is {0, 1.5, 1.5}", "[spectral]") {
  // frozen by an independent 3x3 eigensolve oracle
  auto dec = spectral_decomposition(complete_graph(3));
  CHECK(dec.eigenvalues(0) == Approx(0.0).margin(1e-10));
  CHECK(dec.eigenvalues(1) == Approx(1.5).margin(1e-10));
  CHECK(dec.eigenvalues(2) == Approx(1.5).margin(1e-10));
}

TEST_CASE("empty graph yields the zero Laplacian", "[spectral]") {
  Graph g;
  g.n = 4;
  g.features = Eigen::MatrixXd::Zero(4, 1);
  g.labels.assign(4, 0);
  g.num_classes = 1;
  CHECK(normalized_laplacian(g).isZero(0.0));
}

TEST_CASE("identity matrix eigendecomposes to all-ones spectrum", "[spectral]") {
  auto dec = eigendecompose(Eigen::MatrixXd::Identity(3, 3));
  for (int i = 0; i < 3; ++i) CHECK(dec.eigenvalues(i) == Approx(1.0));
}

TEST_CASE("eigendecompose rejects asymmetric input", "[spectral]") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 0.5, 0;
  CHECK_THROWS_AS(eigendecompose(m), ValidationError);
}

TEST_CASE("reconstruction residual on random symmetric matrices", "[spectral]") {
  Rng rng(4);
  Eigen::MatrixXd m(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = i; j < 20; ++j) m(i, j) = m(j, i) = rng.normal();
  auto dec = eigendecompose(m);
  Eigen::MatrixXd rec = dec.eigenvectors * dec.eigenvalues.asDiagonal() *
                        dec.eigenvectors.transpose();
  CHECK((rec - m).cwiseAbs().maxCoeff() < 1e-6);
  Eigen::MatrixXd gram = dec.eigenvectors.transpose() * dec.eigenvectors;
  CHECK((gram - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("normalized-Laplacian eigenvalues stay in [0, 2]", "[spectral]") {
  for (int trial = 0; trial < 40; ++trial) {
    Graph g = generate_sbm({5 + trial % 20, 5 + (trial / 2) % 15},
                           0.05 + 0.02 * (trial % 10), 0.05, 3, 500 + trial);
    auto dec = spectral_decomposition(g);
    CHECK(dec.eigenvalues(0) >= -1e-8);
    CHECK(dec.eigenvalues(g.n - 1) <= 2.0 + 1e-8);
    // sorted ascending
    for (int i = 1; i < g.n; ++i) CHECK(dec.eigenvalues(i) >= dec.eigenvalues(i - 1));
  }
}

TEST_CASE("weighted adjacency uses absolute-value degrees", "[spectral]") {
  Eigen::MatrixXd a(2, 2);
  a << 0, -0.5, -0.5, 0;
  Eigen::MatrixXd l = normalized_laplacian(a);
  CHECK(l(0, 0) == Approx(1.0));
  CHECK(l(0, 1) == Approx(1.0));  // -(-0.5)/0.5
  auto dec = eigendecompose(l);
  CHECK(dec.eigenvalues(0) == Approx(0.0).margin(1e-12));
  CHECK(dec.eigenvalues(1) == Approx(2.0).margin(1e-12));
}
