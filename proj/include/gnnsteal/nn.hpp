#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <vector>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/rng.hpp"

namespace gnnsteal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd glorot_uniform(int rows, int cols, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixXd w(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-limit, limit);
  return w;
}

// ---------------------------------------------------------------------------
// Activations (value + in-place backward helpers)
// ---------------------------------------------------------------------------

inline MatrixXd relu(const MatrixXd& x) { return x.cwiseMax(0.0); }

inline MatrixXd relu_backward(const MatrixXd& x, const MatrixXd& grad) {
  return (x.array() > 0.0).cast<double>().matrix().cwiseProduct(grad);
}

inline MatrixXd elu(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

inline MatrixXd elu_backward(const MatrixXd& x, const MatrixXd& grad) {
  MatrixXd d = x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
  return d.cwiseProduct(grad);
}

inline MatrixXd leaky_relu(const MatrixXd& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

inline MatrixXd leaky_relu_backward(const MatrixXd& x, const MatrixXd& grad, double slope) {
  MatrixXd d = x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
  return d.cwiseProduct(grad);
}

/// Row-wise softmax with max-subtraction.
inline MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    VectorXd row = logits.row(i);
    double m = row.maxCoeff();
    VectorXd e = (row.array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

/// Mean cross-entropy over rows; dLogits = (softmax − onehot)/rows.
inline double cross_entropy(const MatrixXd& logits, const std::vector<int>& labels,
                            MatrixXd* d_logits = nullptr) {
  const auto n = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError("cross_entropy: label count mismatch");
  MatrixXd p = softmax_rows(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss -= std::log(std::max(p(i, labels[i]), 1e-300));
  loss /= static_cast<double>(n);
  if (d_logits) {
    *d_logits = p / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) (*d_logits)(i, labels[i]) -= 1.0 / n;
  }
  return loss;
}

/// Argmax with ties broken by lowest index.
inline int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

inline std::vector<int> argmax_rows(const MatrixXd& scores) {
  std::vector<int> out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) out[i] = argmax_row(scores.row(i));
  return out;
}

inline double accuracy_on(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ValidationError("accuracy: size mismatch or empty");
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Adam over a flat list of parameter matrices
// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<MatrixXd*>& params, const std::vector<const MatrixXd*>& grads) {
    if (params.size() != grads.size()) throw ValidationError("adam: param/grad count mismatch");
    if (slots_.empty()) {
      for (auto* p : params)
        slots_.push_back({MatrixXd::Zero(p->rows(), p->cols()),
                          MatrixXd::Zero(p->rows(), p->cols())});
    }
    if (slots_.size() != params.size()) throw ValidationError("adam: parameter set changed");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& s = slots_[i];
      const MatrixXd& g = *grads[i];
      s.m = beta1_ * s.m + (1.0 - beta1_) * g;
      s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
      MatrixXd mhat = s.m / bc1;
      MatrixXd vhat = s.v / bc2;
      *params[i] -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
  }

  double learning_rate() const { return lr_; }

 private:
  struct Slot {
    MatrixXd m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::vector<Slot> slots_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Linear layer with cached input for backward
// ---------------------------------------------------------------------------

struct Linear {
  MatrixXd weight;     // out × in
  MatrixXd bias;       // 1 × out (kept as a matrix so Adam sees a uniform type)
  MatrixXd grad_weight;
  MatrixXd grad_bias;
  MatrixXd cached_input;

  Linear() = default;
  Linear(int in_dim, int out_dim, Rng& rng)
      : weight(glorot_uniform(out_dim, in_dim, rng)),
        bias(MatrixXd::Zero(1, out_dim)),
        grad_weight(MatrixXd::Zero(out_dim, in_dim)),
        grad_bias(MatrixXd::Zero(1, out_dim)) {}

  MatrixXd forward(const MatrixXd& x) {
    cached_input = x;
    return (x * weight.transpose()).rowwise() + bias.row(0);
  }

  MatrixXd operator()(const MatrixXd& x) const {
    return (x * weight.transpose()).rowwise() + bias.row(0);
  }

  MatrixXd backward(const MatrixXd& grad_out) {
    grad_weight += grad_out.transpose() * cached_input;
    grad_bias += grad_out.colwise().sum();
    return grad_out * weight;
  }

  void zero_grads() {
    grad_weight.setZero();
    grad_bias.setZero();
  }
};

// ---------------------------------------------------------------------------
// Two-layer MLP classification head (hidden 100, cross-entropy)
// ---------------------------------------------------------------------------

struct ClassifierHead {
  Linear fc1, fc2;
  std::vector<double> loss_curve;

  ClassifierHead() = default;
  ClassifierHead(int in_dim, int num_classes, Rng& rng, int hidden = 100)
      : fc1(in_dim, hidden, rng), fc2(hidden, num_classes, rng) {}

  MatrixXd logits(const MatrixXd& x) const { return fc2(relu(fc1(x))); }

  std::vector<int> predict(const MatrixXd& x) const { return argmax_rows(logits(x)); }
};

/// Trains the head on frozen embeddings with Adam(0.001) for `epochs` epochs.
inline ClassifierHead train_classifier_head(const MatrixXd& embeddings,
                                            const std::vector<int>& labels,
                                            std::uint64_t seed, int num_classes,
                                            int epochs = 300, double lr = 1e-3) {
  if (embeddings.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ValidationError("train_classifier_head: row/label count mismatch");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw ValidationError("train_classifier_head: need at least two distinct classes");
  Rng rng(mix_seed(seed, "classifier-head"));
  ClassifierHead head(static_cast<int>(embeddings.cols()), num_classes, rng);
  Adam opt(lr);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    head.fc1.zero_grads();
    head.fc2.zero_grads();
    MatrixXd z1 = head.fc1.forward(embeddings);
    MatrixXd h1 = relu(z1);
    MatrixXd logits = head.fc2.forward(h1);
    MatrixXd d_logits;
    double loss = cross_entropy(logits, labels, &d_logits);
    head.loss_curve.push_back(loss);
    MatrixXd dh1 = head.fc2.backward(d_logits);
    head.fc1.backward(relu_backward(z1, dh1));
    opt.step({&head.fc1.weight, &head.fc1.bias, &head.fc2.weight, &head.fc2.bias},
             {&head.fc1.grad_weight, &head.fc1.grad_bias, &head.fc2.grad_weight,
              &head.fc2.grad_bias});
  }
  return head;
}

}  // namespace gnnsteal
