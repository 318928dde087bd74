#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/augment.hpp"
#include "gnnsteal/errors.hpp"
#include "gnnsteal/gnn.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/metrics.hpp"
#include "gnnsteal/nn.hpp"
#include "gnnsteal/oracle.hpp"

namespace gnnsteal {

/// Cosine similarity with the zero-vector convention c(0, ·) = 0.
inline double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return x.dot(y) / (nx * ny);
}

namespace detail {

/// Rows normalized to unit length; zero rows stay zero.
inline MatrixXd normalize_rows(const MatrixXd& x, Eigen::VectorXd* norms = nullptr) {
  MatrixXd out = x;
  if (norms) norms->resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double r = x.row(i).norm();
    if (norms) (*norms)(i) = r;
    if (r > 0.0) out.row(i) /= r;
  }
  return out;
}

/// The symmetrized node-level contrastive objective evaluated on similarity
/// matrices: cross = c(t_i, s_k), intra_t = c(t_i, t_k), intra_s = c(s_i, s_k).
///   J = −(1/2n) Σ_i [ℓ_i(t,s) + ℓ_i(s,t)]
///   ℓ_i(x,y) = c(x_i,y_i)/τ − log( Σ_k e^{c(x_i,y_k)/τ} + Σ_{k≠i} e^{c(y_i,y_k)/τ} )
/// With include_own_negatives, each direction also counts its own-side
/// negatives Σ_{k≠i} e^{c(x_i,x_k)/τ} (ablation flag; off = Eq. 2 verbatim).
/// Log-sum-exp stabilized. Optional gradients w.r.t. the similarity entries.
inline double contrastive_from_sims(const MatrixXd& cross, const MatrixXd& intra_t,
                                    const MatrixXd& intra_s, double tau,
                                    bool include_own_negatives = false,
                                    MatrixXd* d_cross = nullptr,
                                    MatrixXd* d_intra_t = nullptr,
                                    MatrixXd* d_intra_s = nullptr) {
  const auto n = cross.rows();
  if (n == 0) throw ValidationError("contrastive loss: empty input");
  if (d_cross) d_cross->setZero(n, n);
  if (d_intra_t) d_intra_t->setZero(n, n);
  if (d_intra_s) d_intra_s->setZero(n, n);
  const double scale = -1.0 / (2.0 * static_cast<double>(n));
  double total = 0.0;

  // one direction: numerator cross(i,i); denominator over cross row/col plus
  // the y-side intra row (and optionally the x-side intra row)
  auto direction = [&](bool t_to_s) {
    const MatrixXd& own = t_to_s ? intra_t : intra_s;    // x-side sims
    const MatrixXd& other = t_to_s ? intra_s : intra_t;  // y-side sims
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      auto cross_at = [&](Eigen::Index k) { return t_to_s ? cross(i, k) : cross(k, i); };
      for (Eigen::Index k = 0; k < n; ++k) mx = std::max(mx, cross_at(k) / tau);
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) {
          mx = std::max(mx, other(i, k) / tau);
          if (include_own_negatives) mx = std::max(mx, own(i, k) / tau);
        }
      double z = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) z += std::exp(cross_at(k) / tau - mx);
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) {
          z += std::exp(other(i, k) / tau - mx);
          if (include_own_negatives) z += std::exp(own(i, k) / tau - mx);
        }
      double lse = mx + std::log(z);
      total += scale * (cross(i, i) / tau - lse);

      if (d_cross) {
        auto add_cross = [&](Eigen::Index k, double v) {
          if (t_to_s) (*d_cross)(i, k) += v;
          else (*d_cross)(k, i) += v;
        };
        add_cross(i, scale / tau);
        for (Eigen::Index k = 0; k < n; ++k) {
          double w = std::exp(cross_at(k) / tau - lse);
          add_cross(k, -scale * w / tau);
        }
        MatrixXd* d_other = t_to_s ? d_intra_s : d_intra_t;
        MatrixXd* d_own = t_to_s ? d_intra_t : d_intra_s;
        for (Eigen::Index k = 0; k < n; ++k)
          if (k != i) {
            (*d_other)(i, k) -= scale * std::exp(other(i, k) / tau - lse) / tau;
            if (include_own_negatives)
              (*d_own)(i, k) -= scale * std::exp(own(i, k) / tau - lse) / tau;
          }
      }
    }
  };
  direction(true);
  direction(false);
  return total;
}

}  // namespace detail

/// Contrastive loss J on projected representations T = g(R), S = g(H_S).
inline double contrastive_loss(const MatrixXd& t, const MatrixXd& s, double tau,
                               bool include_own_negatives = false) {
  if (tau <= 0) throw ValidationError("contrastive_loss: tau must be positive");
  if (t.rows() != s.rows() || t.cols() != s.cols())
    throw ValidationError("contrastive_loss: shape mismatch");
  if (t.rows() == 0) throw ValidationError("contrastive_loss: empty input");
  MatrixXd tn = detail::normalize_rows(t);
  MatrixXd sn = detail::normalize_rows(s);
  return detail::contrastive_from_sims(tn * sn.transpose(), tn * tn.transpose(),
                                       sn * sn.transpose(), tau, include_own_negatives);
}

/// Same, with gradients w.r.t. both input matrices.
inline double contrastive_loss_grads(const MatrixXd& t, const MatrixXd& s, double tau,
                                     MatrixXd& d_t, MatrixXd& d_s,
                                     bool include_own_negatives = false) {
  if (tau <= 0) throw ValidationError("contrastive_loss: tau must be positive");
  if (t.rows() != s.rows() || t.cols() != s.cols())
    throw ValidationError("contrastive_loss: shape mismatch");
  if (t.rows() == 0) throw ValidationError("contrastive_loss: empty input");
  Eigen::VectorXd t_norms, s_norms;
  MatrixXd tn = detail::normalize_rows(t, &t_norms);
  MatrixXd sn = detail::normalize_rows(s, &s_norms);
  MatrixXd d_cross, d_tt, d_ss;
  double loss = detail::contrastive_from_sims(
      tn * sn.transpose(), tn * tn.transpose(), sn * sn.transpose(), tau,
      include_own_negatives, &d_cross, &d_tt, &d_ss);
  MatrixXd d_tn = d_cross * sn + (d_tt + d_tt.transpose()) * tn;
  MatrixXd d_sn = d_cross.transpose() * tn + (d_ss + d_ss.transpose()) * sn;
  // back through row normalization x̂ = x/‖x‖: dx = (dx̂ − (x̂·dx̂) x̂)/‖x‖
  d_t.setZero(t.rows(), t.cols());
  d_s.setZero(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (t_norms(i) > 0.0)
      d_t.row(i) = (d_tn.row(i) - d_tn.row(i).dot(tn.row(i)) * tn.row(i)) / t_norms(i);
    if (s_norms(i) > 0.0)
      d_s.row(i) = (d_sn.row(i) - d_sn.row(i).dot(sn.row(i)) * sn.row(i)) / s_norms(i);
  }
  return loss;
}

/// Root-mean-square alignment loss of Shen et al.'s baseline.
inline double rmse_alignment_loss(const MatrixXd& r, const MatrixXd& h,
                                  MatrixXd* d_h = nullptr) {
  if (r.rows() != h.rows() || r.cols() != h.cols())
    throw ValidationError("rmse_alignment_loss: shape mismatch");
  const double count = static_cast<double>(r.size());
  if (count == 0) throw ValidationError("rmse_alignment_loss: empty input");
  MatrixXd diff = h - r;
  double loss = std::sqrt(diff.squaredNorm() / count);
  if (d_h) {
    if (loss > 0)
      *d_h = diff / (count * loss);
    else
      d_h->setZero(h.rows(), h.cols());
  }
  return loss;
}

/// Single-layer projection head g(): linear to proj_dim with ELU. Caches are
/// per-pass so one head can serve both spaces (shared-head ablation) without
/// the two forwards clobbering each other.
struct ProjectionHead {
  MatrixXd weight;  // proj × in
  MatrixXd bias;    // 1 × proj
  MatrixXd grad_weight, grad_bias;

  struct Pass {
    MatrixXd input, pre;
  };

  ProjectionHead() = default;
  ProjectionHead(int in_dim, int proj_dim, Rng& rng)
      : weight(glorot_uniform(proj_dim, in_dim, rng)),
        bias(MatrixXd::Zero(1, proj_dim)),
        grad_weight(MatrixXd::Zero(proj_dim, in_dim)),
        grad_bias(MatrixXd::Zero(1, proj_dim)) {}

  MatrixXd forward(const MatrixXd& x, Pass& pass) const {
    pass.input = x;
    pass.pre = (x * weight.transpose()).rowwise() + bias.row(0);
    return elu(pass.pre);
  }

  MatrixXd backward(const MatrixXd& d_out, const Pass& pass) {
    MatrixXd d_pre = elu_backward(pass.pre, d_out);
    grad_weight += d_pre.transpose() * pass.input;
    grad_bias += d_pre.colwise().sum();
    return d_pre * weight;
  }

  void zero_grads() {
    grad_weight.setZero();
    grad_bias.setZero();
  }
};

struct StealConfig {
  double tau = 1.0;
  int epochs = 200;
  ResponseKind response_kind = ResponseKind::Prediction;
  AugmentConfig augment;
  Arch surrogate_arch = Arch::GIN;
  LossKind loss = LossKind::Contrastive;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int head_epochs = 300;
  int proj_dim = 128;
  bool shared_projection_head = false;  // ablation: one g() for both spaces
  bool include_own_negatives = false;   // ablation on Eq. 2's denominator
  double surrogate_dropout = 0.0;

  void validate() const {
    if (tau <= 0) throw ValidationError("steal config: tau must be positive");
    if (epochs <= 0 || head_epochs <= 0)
      throw ValidationError("steal config: epochs must be positive");
    augment.validate();
  }
};

struct StealResult {
  ModelHandle surrogate;
  ClassifierHead head;
  long queries_used = 0;
  std::vector<double> loss_curve;
  nlohmann::json meta;
};

/// Core training loop on pre-queried responses. Contrastive path: the
/// spectral view is computed once (it is deterministic given graph and seed)
/// and the classical augmentations refresh the view every epoch; RMSE
/// baseline: plain alignment on the unaugmented graph, no heads, matching
/// Shen et al. Afterwards the surrogate is frozen and an MLP head is trained
/// on its clean query-graph outputs against C_Q.
inline StealResult steal_from_responses(const MatrixXd& responses, const Graph& query_graph,
                                        const StealConfig& cfg) {
  cfg.validate();
  if (responses.rows() != query_graph.n)
    throw ValidationError("steal: response row count != query node count");
  const int resp_dim = static_cast<int>(responses.cols());

  StealResult result;
  ModelConfig mc = surrogate_config(cfg.surrogate_arch, query_graph.feature_dim(), resp_dim);
  mc.dropout = cfg.surrogate_dropout;
  result.surrogate.config = mc;
  result.surrogate.model =
      std::make_shared<GnnModel>(mc, mix_seed(cfg.seed, "surrogate-init"));
  GnnModel& model = *result.surrogate.model;
  Adam opt(cfg.learning_rate);

  auto step = [&](const std::vector<ParamRef>& extra) {
    std::vector<MatrixXd*> params;
    std::vector<const MatrixXd*> grads;
    for (auto& p : model.parameters()) {
      params.push_back(p.value);
      grads.push_back(p.grad);
    }
    for (auto& p : extra) {
      params.push_back(p.value);
      grads.push_back(p.grad);
    }
    opt.step(params, grads);
  };

  if (cfg.loss == LossKind::Contrastive) {
    AugmentConfig aug = cfg.augment;
    aug.seed = mix_seed(cfg.seed, "augment");
    AugmentedView base;
    bool spectral_ok = true;
    try {
      base = spectral_augment(query_graph, aug);
    } catch (const AugmentError& e) {
      spectral_ok = false;
      base = identity_view(query_graph);
      result.meta["spectralFallback"] = e.what();
    }
    result.meta["spectralApplied"] = spectral_ok;

    Rng head_rng(mix_seed(cfg.seed, "projection-heads"));
    ProjectionHead head_t(resp_dim, cfg.proj_dim, head_rng);
    ProjectionHead head_s(resp_dim, cfg.proj_dim, head_rng);
    ProjectionHead& head_s_ref = cfg.shared_projection_head ? head_t : head_s;

    std::vector<ParamRef> head_params;
    head_params.push_back({"headT.weight", &head_t.weight, &head_t.grad_weight});
    head_params.push_back({"headT.bias", &head_t.bias, &head_t.grad_bias});
    if (!cfg.shared_projection_head) {
      head_params.push_back({"headS.weight", &head_s.weight, &head_s.grad_weight});
      head_params.push_back({"headS.bias", &head_s.bias, &head_s.grad_bias});
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      AugmentedView view =
          classical_augment(base, query_graph.features, aug, mix_seed(cfg.seed, "classical", epoch));
      MessageGraph mg = MessageGraph::from_dense(view.adjacency);
      model.zero_grads();
      head_t.zero_grads();
      head_s.zero_grads();
      auto res = model.forward(mg, view.features, mix_seed(cfg.seed, "sample", epoch),
                               /*training=*/true);
      ProjectionHead::Pass pass_t, pass_s;
      MatrixXd t = head_t.forward(responses, pass_t);
      MatrixXd s = head_s_ref.forward(res.output, pass_s);
      MatrixXd d_t, d_s;
      double loss = contrastive_loss_grads(t, s, cfg.tau, d_t, d_s,
                                           cfg.include_own_negatives);
      result.loss_curve.push_back(loss);
      MatrixXd d_hs = head_s_ref.backward(d_s, pass_s);
      head_t.backward(d_t, pass_t);  // responses are constants; only head grads matter
      model.backward(d_hs);
      step(head_params);
    }
  } else if (cfg.loss == LossKind::Rmse) {
    MessageGraph mg = MessageGraph::from_graph(query_graph);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      model.zero_grads();
      auto res = model.forward(mg, query_graph.features,
                               mix_seed(cfg.seed, "sample", epoch), /*training=*/true);
      MatrixXd d_hs;
      double loss = rmse_alignment_loss(responses, res.output, &d_hs);
      result.loss_curve.push_back(loss);
      model.backward(d_hs);
      step({});
    }
  } else {
    throw ValidationError("steal: loss kind must be contrastive or rmse");
  }

  // frozen surrogate -> classification head on clean query-graph outputs
  std::vector<int> all_nodes(query_graph.n);
  std::iota(all_nodes.begin(), all_nodes.end(), 0);
  MatrixXd clean = forward_outputs(result.surrogate, query_graph, all_nodes,
                                   mix_seed(cfg.seed, "head-input"));
  result.head = train_classifier_head(clean, query_graph.labels,
                                      mix_seed(cfg.seed, "head-train"),
                                      query_graph.num_classes, cfg.head_epochs);
  result.queries_used = query_graph.n;
  result.meta["lossKind"] = to_string(cfg.loss);
  result.meta["responseKind"] = to_string(cfg.response_kind);
  result.meta["queriesUsed"] = result.queries_used;
  return result;
}

/// Full attack: query the oracle exactly once per query node (the queries
/// consumed are independent of the number of training epochs), then train.
inline StealResult steal(VictimOracle& oracle, const Graph& query_graph,
                         const StealConfig& cfg) {
  cfg.validate();
  std::vector<int> nodes(query_graph.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  MatrixXd responses = oracle.answer_query(query_graph, nodes, cfg.response_kind);
  return steal_from_responses(responses, query_graph, cfg);
}

/// Theft + reconnaissance metrics on held-out test data. Target predictions
/// are taken from the target handle directly (out-of-band; the oracle ledger
/// is not involved in evaluation).
inline Metrics evaluate_surrogate(const StealResult& result, const ModelHandle& target,
                                  const Graph& test_graph, std::uint64_t seed = 0) {
  std::vector<int> nodes(test_graph.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::vector<int> pred_s =
      predict(result.surrogate, &result.head, test_graph, nodes, mix_seed(seed, "eval-s"));
  std::vector<int> pred_t = predict(target, nullptr, test_graph, nodes, mix_seed(seed, "eval-t"));
  Metrics m;
  m.accuracy = accuracy_score(pred_s, test_graph.labels);
  m.fidelity = accuracy_score(pred_s, pred_t);
  m.f1 = macro_f1(pred_s, test_graph.labels, test_graph.num_classes);
  return m;
}

/// Serializes surrogate + head + run metadata: the ModelHandle directory
/// layout plus steal_meta.json.
inline void save_steal_result(const StealResult& result, const std::filesystem::path& dir) {
  save_model(result.surrogate, dir);
  {
    nlohmann::json head = {
        {"fc1", {{"rows", result.head.fc1.weight.rows()}, {"cols", result.head.fc1.weight.cols()}}},
        {"fc2", {{"rows", result.head.fc2.weight.rows()}, {"cols", result.head.fc2.weight.cols()}}}};
    std::ofstream out(dir / "head_shapes.json");
    out << head.dump(2) << "\n";
    std::ofstream bin(dir / "head_weights.bin", std::ios::binary);
    for (const MatrixXd* m : {&result.head.fc1.weight, &result.head.fc1.bias,
                              &result.head.fc2.weight, &result.head.fc2.bias}) {
      for (Eigen::Index i = 0; i < m->rows(); ++i)
        for (Eigen::Index j = 0; j < m->cols(); ++j) {
          float f = static_cast<float>((*m)(i, j));
          bin.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }
  }
  {
    nlohmann::json meta = result.meta;
    meta["queriesUsed"] = result.queries_used;
    meta["lossCurve"] = result.loss_curve;
    std::ofstream out(dir / "steal_meta.json");
    out << meta.dump(2) << "\n";
  }
}

}  // namespace gnnsteal
