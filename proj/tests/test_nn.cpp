#include <catch2/catch_amalgamated.hpp>

#include "gnnsteal/nn.hpp"

using namespace gnnsteal;
using Catch::Approx;

namespace {

// central finite differences against an analytic gradient, relative check
double rel_diff(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-8); }

}  // namespace

TEST_CASE("cross entropy matches finite differences", "[nn]") {
  Rng rng(3);
  MatrixXd logits(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) logits(i, j) = rng.normal();
  std::vector<int> labels{0, 2, 1, 2};
  MatrixXd grad;
  cross_entropy(logits, labels, &grad);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      MatrixXd lp = logits, lm = logits;
      lp(i, j) += h;
      lm(i, j) -= h;
      double fd = (cross_entropy(lp, labels) - cross_entropy(lm, labels)) / (2 * h);
      CHECK(rel_diff(fd, grad(i, j)) < 1e-4);
    }
}

TEST_CASE("linear layer gradients match finite differences", "[nn]") {
  Rng rng(5);
  Linear lin(4, 3, rng);
  MatrixXd x(2, 4), sensitivity(2, 3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
    for (int j = 0; j < 3; ++j) sensitivity(i, j) = rng.normal();
  }
  auto loss_of = [&](const Linear& l) { return (l(x).cwiseProduct(sensitivity)).sum(); };
  lin.zero_grads();
  lin.forward(x);
  MatrixXd dx = lin.backward(sensitivity);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      Linear lp = lin, lm = lin;
      lp.weight(i, j) += h;
      lm.weight(i, j) -= h;
      CHECK(rel_diff((loss_of(lp) - loss_of(lm)) / (2 * h), lin.grad_weight(i, j)) < 1e-4);
    }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      MatrixXd xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      double fp = (lin(xp).cwiseProduct(sensitivity)).sum();
      double fm = (lin(xm).cwiseProduct(sensitivity)).sum();
      CHECK(rel_diff((fp - fm) / (2 * h), dx(i, j)) < 1e-4);
    }
}

TEST_CASE("adam minimizes a quadratic", "[nn]") {
  MatrixXd x = MatrixXd::Constant(1, 1, 5.0);
  Adam opt(0.05);
  for (int i = 0; i < 400; ++i) {
    MatrixXd g = 2.0 * x;
    opt.step({&x}, {&g});
  }
  CHECK(std::abs(x(0, 0)) < 1e-2);
}

TEST_CASE("argmax tie-break picks the lowest index", "[nn]") {
  Eigen::RowVectorXd row(3);
  row << 0.5, 0.5, 0.2;
  CHECK(argmax_row(row) == 0);
  row << 0.2, 0.7, 0.1;
  CHECK(argmax_row(row) == 1);
}

TEST_CASE("classifier head reaches accuracy 1 on one-hot embeddings", "[nn]") {
  const int n = 30, c = 5;
  MatrixXd emb = MatrixXd::Zero(n, c);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % c;
    emb(i, labels[i]) = 1.0;
  }
  auto head = train_classifier_head(emb, labels, 3, c);
  CHECK(accuracy_on(head.predict(emb), labels) == 1.0);
}

TEST_CASE("classifier head rejects single-class labels", "[nn]") {
  MatrixXd emb = MatrixXd::Random(10, 4);
  std::vector<int> labels(10, 1);
  CHECK_THROWS_AS(train_classifier_head(emb, labels, 1, 3), ValidationError);
}

TEST_CASE("classifier head beats chance on random balanced embeddings", "[nn]") {
  Rng rng(8);
  const int n = 100, c = 5;
  MatrixXd emb(n, 16);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % c;
    for (int j = 0; j < 16; ++j) emb(i, j) = rng.normal();
  }
  auto head = train_classifier_head(emb, labels, 4, c);
  CHECK(accuracy_on(head.predict(emb), labels) > 1.0 / c);  // memorization lower bound
}

TEST_CASE("classifier head separates well-separated gaussian blobs", "[nn]") {
  // 5 classes with 5-sigma separation; held-out accuracy must exceed 0.95
  Rng rng(11);
  const int c = 5, per = 40, dim = 8;
  MatrixXd train(c * per, dim), heldout(c * per, dim);
  std::vector<int> labels(c * per);
  for (int cls = 0; cls < c; ++cls)
    for (int i = 0; i < per; ++i) {
      int row = cls * per + i;
      labels[row] = cls;
      for (int j = 0; j < dim; ++j) {
        double mu = (j == cls) ? 5.0 : 0.0;
        train(row, j) = rng.normal(mu, 1.0);
        heldout(row, j) = rng.normal(mu, 1.0);
      }
    }
  auto head = train_classifier_head(train, labels, 2, c);
  CHECK(accuracy_on(head.predict(heldout), labels) > 0.95);
}
