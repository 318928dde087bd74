#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/nn.hpp"
#include "gnnsteal/rng.hpp"

namespace gnnsteal {

enum class Arch { GIN, GAT, SAGE };
enum class RoleKind { Target, Surrogate };

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::GIN: return "gin";
    case Arch::GAT: return "gat";
    default: return "sage";
  }
}

inline Arch arch_from_string(const std::string& s) {
  if (s == "gin") return Arch::GIN;
  if (s == "gat") return Arch::GAT;
  if (s == "sage") return Arch::SAGE;
  throw ValidationError("unknown architecture '" + s + "'");
}

struct ModelConfig {
  Arch arch = Arch::GIN;
  RoleKind role = RoleKind::Target;
  int input_dim = 0;
  int hidden_dim = 128;
  int output_dim = 0;   // num classes (target) or response dim (surrogate)
  int num_layers = 0;
  std::vector<int> fanouts;
  int attention_heads = 4;
  double dropout = 0.0;
  bool final_linear = false;  // SAGE target: trailing linear classifier

  void validate() const {
    if (input_dim <= 0 || hidden_dim <= 0 || output_dim <= 0)
      throw ValidationError("model config: dimensions must be positive");
    if (num_layers != static_cast<int>(fanouts.size()))
      throw ValidationError("model config: num_layers must equal len(fanouts)");
    if (arch == Arch::GAT && attention_heads <= 0)
      throw ValidationError("model config: GAT needs positive attention head count");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ValidationError("model config: dropout must lie in [0, 1)");
  }
};

/// Appendix-A target architectures: GIN 3 layers / fanout 10 / hidden 128;
/// GAT 3 layers / 4 heads / 128 per head, heads concatenated between layers
/// and averaged at the classification layer; SAGE 2 GCN-aggregator layers,
/// fanouts 25/10, plus a linear classification layer. Dropout 0.5.
inline ModelConfig target_config(Arch arch, int input_dim, int num_classes) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.role = RoleKind::Target;
  cfg.input_dim = input_dim;
  cfg.output_dim = num_classes;
  cfg.hidden_dim = 128;
  cfg.dropout = 0.5;
  if (arch == Arch::SAGE) {
    cfg.num_layers = 2;
    cfg.fanouts = {25, 10};
    cfg.final_linear = true;
  } else {
    cfg.num_layers = 3;
    cfg.fanouts = {10, 10, 10};
  }
  return cfg;
}

/// Appendix-B surrogates: 2 layers, fanouts 10/50, first hidden 128, second
/// output sized to the query response.
inline ModelConfig surrogate_config(Arch arch, int input_dim, int response_dim) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.role = RoleKind::Surrogate;
  cfg.input_dim = input_dim;
  cfg.output_dim = response_dim;
  cfg.hidden_dim = 128;
  cfg.num_layers = 2;
  cfg.fanouts = {10, 50};
  cfg.dropout = 0.0;
  return cfg;
}

// ---------------------------------------------------------------------------
// Message-passing structure + per-layer neighbor sampling
// ---------------------------------------------------------------------------

using NeighborLists = std::vector<std::vector<std::pair<int, double>>>;

struct MessageGraph {
  int n = 0;
  NeighborLists nbrs;
  bool unit_weights = true;

  static MessageGraph from_graph(const Graph& g) {
    MessageGraph mg;
    mg.n = g.n;
    mg.nbrs = g.adjacency_lists();
    mg.unit_weights = !g.weighted();
    return mg;
  }

  /// Entries with |w| < weight_eps are treated as absent.
  static MessageGraph from_dense(const Eigen::MatrixXd& A, double weight_eps = 1e-4) {
    if (A.rows() != A.cols()) throw ValidationError("MessageGraph: matrix not square");
    MessageGraph mg;
    mg.n = static_cast<int>(A.rows());
    mg.nbrs.resize(mg.n);
    mg.unit_weights = true;
    for (int i = 0; i < mg.n; ++i) {
      for (int j = 0; j < mg.n; ++j) {
        if (i == j) continue;
        double w = A(i, j);
        if (std::abs(w) >= weight_eps) {
          mg.nbrs[i].emplace_back(j, w);
          if (w != 1.0) mg.unit_weights = false;
        }
      }
    }
    return mg;
  }
};

/// Sample up to `fanout` neighbors per node, without replacement; all
/// neighbors when degree <= fanout or fanout <= 0. Uniform on unit-weight
/// graphs, probability ∝ |w| on weighted ones.
inline NeighborLists sample_neighbors(const MessageGraph& mg, int fanout, Rng& rng) {
  NeighborLists out(mg.n);
  for (int v = 0; v < mg.n; ++v) {
    const auto& nb = mg.nbrs[v];
    int deg = static_cast<int>(nb.size());
    if (fanout <= 0 || deg <= fanout) {
      out[v] = nb;
      continue;
    }
    std::vector<int> picked;
    if (mg.unit_weights) {
      picked = rng.sample_indices(deg, fanout);
    } else {
      std::vector<double> w(deg);
      for (int j = 0; j < deg; ++j) w[j] = std::abs(nb[j].second);
      picked = rng.sample_weighted(w, fanout);
    }
    out[v].reserve(picked.size());
    for (int j : picked) out[v].push_back(nb[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  MatrixXd* value;
  MatrixXd* grad;
};

class GnnLayer {
 public:
  virtual ~GnnLayer() = default;
  virtual MatrixXd forward(const MatrixXd& h, const NeighborLists& ns) = 0;
  virtual MatrixXd backward(const MatrixXd& d_out) = 0;
  virtual void collect(const std::string& prefix, std::vector<ParamRef>& out) = 0;
  virtual void zero_grads() = 0;
  virtual int output_dim() const = 0;
};

/// GIN layer with ε = 0 and a single linear (+ optional ReLU) update:
/// y_v = act(W [(1+ε) h_v + Σ_u w_uv h_u] + b).
class GinLayer final : public GnnLayer {
 public:
  GinLayer(int in_dim, int out_dim, bool use_relu, Rng& rng)
      : lin_(in_dim, out_dim, rng), use_relu_(use_relu) {}

  MatrixXd forward(const MatrixXd& h, const NeighborLists& ns) override {
    ns_ = &ns;
    MatrixXd z = (1.0 + eps_) * h;
    for (int v = 0; v < h.rows(); ++v)
      for (auto [u, w] : ns[v]) z.row(v) += w * h.row(u);
    pre_ = lin_.forward(z);
    return use_relu_ ? relu(pre_) : pre_;
  }

  MatrixXd backward(const MatrixXd& d_out) override {
    MatrixXd d_pre = use_relu_ ? relu_backward(pre_, d_out) : d_out;
    MatrixXd d_z = lin_.backward(d_pre);
    MatrixXd d_h = (1.0 + eps_) * d_z;
    for (int v = 0; v < d_z.rows(); ++v)
      for (auto [u, w] : (*ns_)[v]) d_h.row(u) += w * d_z.row(v);
    return d_h;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &lin_.weight, &lin_.grad_weight});
    out.push_back({prefix + ".bias", &lin_.bias, &lin_.grad_bias});
  }

  void zero_grads() override { lin_.zero_grads(); }
  int output_dim() const override { return static_cast<int>(lin_.weight.rows()); }

 private:
  Linear lin_;
  bool use_relu_;
  double eps_ = 0.0;  // paper leaves GIN ε unspecified; fixed 0
  const NeighborLists* ns_ = nullptr;
  MatrixXd pre_;
};

/// GraphSAGE layer with the GCN aggregator:
/// y_v = act(W · mean({h_v} ∪ {w_uv h_u}) + b), mean over 1 + #sampled.
class SageLayer final : public GnnLayer {
 public:
  SageLayer(int in_dim, int out_dim, bool use_relu, Rng& rng)
      : lin_(in_dim, out_dim, rng), use_relu_(use_relu) {}

  MatrixXd forward(const MatrixXd& h, const NeighborLists& ns) override {
    ns_ = &ns;
    inv_count_.resize(h.rows());
    MatrixXd m = h;
    for (int v = 0; v < h.rows(); ++v) {
      for (auto [u, w] : ns[v]) m.row(v) += w * h.row(u);
      inv_count_[v] = 1.0 / (1.0 + static_cast<double>(ns[v].size()));
      m.row(v) *= inv_count_[v];
    }
    pre_ = lin_.forward(m);
    return use_relu_ ? relu(pre_) : pre_;
  }

  MatrixXd backward(const MatrixXd& d_out) override {
    MatrixXd d_pre = use_relu_ ? relu_backward(pre_, d_out) : d_out;
    MatrixXd d_m = lin_.backward(d_pre);
    MatrixXd d_h = MatrixXd::Zero(d_m.rows(), d_m.cols());
    for (int v = 0; v < d_m.rows(); ++v) {
      Eigen::RowVectorXd dv = d_m.row(v) * inv_count_[v];
      d_h.row(v) += dv;
      for (auto [u, w] : (*ns_)[v]) d_h.row(u) += w * dv;
    }
    return d_h;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &lin_.weight, &lin_.grad_weight});
    out.push_back({prefix + ".bias", &lin_.bias, &lin_.grad_bias});
  }

  void zero_grads() override { lin_.zero_grads(); }
  int output_dim() const override { return static_cast<int>(lin_.weight.rows()); }

 private:
  Linear lin_;
  bool use_relu_;
  const NeighborLists* ns_ = nullptr;
  std::vector<double> inv_count_;
  MatrixXd pre_;
};

/// Multi-head graph attention per the original design: per head,
/// e_vu = LeakyReLU(a_src·Wh_v + a_dst·Wh_u) over {v} ∪ sampled neighbors,
/// α = softmax(e), out_v = Σ α_vu w_vu Wh_u. Heads are concatenated when
/// `concat`, averaged otherwise. Edge weights multiply the attended message.
class GatLayer final : public GnnLayer {
 public:
  GatLayer(int in_dim, int head_dim, int heads, bool concat, bool use_relu, Rng& rng)
      : in_dim_(in_dim), head_dim_(head_dim), heads_(heads), concat_(concat),
        use_relu_(use_relu) {
    for (int k = 0; k < heads; ++k) {
      w_.push_back(glorot_uniform(head_dim, in_dim, rng));
      a_src_.push_back(glorot_uniform(head_dim, 1, rng));
      a_dst_.push_back(glorot_uniform(head_dim, 1, rng));
      gw_.push_back(MatrixXd::Zero(head_dim, in_dim));
      ga_src_.push_back(MatrixXd::Zero(head_dim, 1));
      ga_dst_.push_back(MatrixXd::Zero(head_dim, 1));
    }
  }

  MatrixXd forward(const MatrixXd& h, const NeighborLists& ns) override {
    ns_ = &ns;
    h_in_ = h;
    const int n = static_cast<int>(h.rows());
    z_.assign(heads_, MatrixXd());
    alpha_.assign(heads_, {});
    pre_att_.assign(heads_, {});
    MatrixXd out = MatrixXd::Zero(n, concat_ ? heads_ * head_dim_ : head_dim_);
    for (int k = 0; k < heads_; ++k) {
      z_[k] = h * w_[k].transpose();                      // n × head_dim
      VectorXd s_src = z_[k] * a_src_[k];                 // n
      VectorXd s_dst = z_[k] * a_dst_[k];
      alpha_[k].resize(n);
      pre_att_[k].resize(n);
      for (int v = 0; v < n; ++v) {
        const auto& nb = ns[v];
        const int m = static_cast<int>(nb.size()) + 1;    // +1 self edge
        VectorXd e(m);
        e(0) = s_src(v) + s_dst(v);
        for (int j = 1; j < m; ++j) e(j) = s_src(v) + s_dst(nb[j - 1].first);
        pre_att_[k][v] = e;
        VectorXd le = e.unaryExpr(
            [](double x) { return x > 0.0 ? x : kLeakySlope * x; });
        double mx = le.maxCoeff();
        VectorXd a = (le.array() - mx).exp();
        a /= a.sum();
        alpha_[k][v] = a;
        Eigen::RowVectorXd acc = a(0) * z_[k].row(v);
        for (int j = 1; j < m; ++j)
          acc += a(j) * nb[j - 1].second * z_[k].row(nb[j - 1].first);
        if (concat_)
          out.block(v, k * head_dim_, 1, head_dim_) = acc;
        else
          out.row(v) += acc / static_cast<double>(heads_);
      }
    }
    pre_ = out;
    return use_relu_ ? relu(pre_) : pre_;
  }

  MatrixXd backward(const MatrixXd& d_out_in) override {
    MatrixXd d_out = use_relu_ ? relu_backward(pre_, d_out_in) : d_out_in;
    const int n = static_cast<int>(h_in_.rows());
    MatrixXd d_h = MatrixXd::Zero(n, in_dim_);
    for (int k = 0; k < heads_; ++k) {
      MatrixXd d_z = MatrixXd::Zero(n, head_dim_);
      VectorXd d_s_src = VectorXd::Zero(n);
      VectorXd d_s_dst = VectorXd::Zero(n);
      for (int v = 0; v < n; ++v) {
        const auto& nb = (*ns_)[v];
        const int m = static_cast<int>(nb.size()) + 1;
        Eigen::RowVectorXd dv = concat_
            ? Eigen::RowVectorXd(d_out.block(v, k * head_dim_, 1, head_dim_))
            : Eigen::RowVectorXd(d_out.row(v) / static_cast<double>(heads_));
        const VectorXd& a = alpha_[k][v];
        // d wrt alpha and z through out_v = Σ_j a_j w_j z_{u_j}
        VectorXd d_a(m);
        d_a(0) = dv.dot(z_[k].row(v));
        d_z.row(v) += a(0) * dv;
        for (int j = 1; j < m; ++j) {
          auto [u, w] = nb[j - 1];
          d_a(j) = w * dv.dot(z_[k].row(u));
          d_z.row(u) += a(j) * w * dv;
        }
        // softmax backward
        double dot = a.dot(d_a);
        VectorXd d_le = (a.array() * (d_a.array() - dot)).matrix();
        // leaky relu backward on attention logits
        const VectorXd& e = pre_att_[k][v];
        VectorXd d_e(m);
        for (int j = 0; j < m; ++j)
          d_e(j) = (e(j) > 0.0 ? 1.0 : kLeakySlope) * d_le(j);
        // e_j = s_src(v) + s_dst(u_j)
        d_s_src(v) += d_e.sum();
        d_s_dst(v) += d_e(0);
        for (int j = 1; j < m; ++j) d_s_dst(nb[j - 1].first) += d_e(j);
      }
      // s_src = z a_src, s_dst = z a_dst
      ga_src_[k] += z_[k].transpose() * d_s_src;
      ga_dst_[k] += z_[k].transpose() * d_s_dst;
      d_z += d_s_src * a_src_[k].transpose() + d_s_dst * a_dst_[k].transpose();
      gw_[k] += d_z.transpose() * h_in_;
      d_h += d_z * w_[k];
    }
    return d_h;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
    for (int k = 0; k < heads_; ++k) {
      std::string hp = prefix + ".head" + std::to_string(k);
      out.push_back({hp + ".weight", &w_[k], &gw_[k]});
      out.push_back({hp + ".a_src", &a_src_[k], &ga_src_[k]});
      out.push_back({hp + ".a_dst", &a_dst_[k], &ga_dst_[k]});
    }
  }

  void zero_grads() override {
    for (int k = 0; k < heads_; ++k) {
      gw_[k].setZero();
      ga_src_[k].setZero();
      ga_dst_[k].setZero();
    }
  }

  int output_dim() const override { return concat_ ? heads_ * head_dim_ : head_dim_; }

  static constexpr double kLeakySlope = 0.2;

 private:
  int in_dim_, head_dim_, heads_;
  bool concat_, use_relu_;
  std::vector<MatrixXd> w_, a_src_, a_dst_, gw_, ga_src_, ga_dst_;
  const NeighborLists* ns_ = nullptr;
  MatrixXd h_in_, pre_;
  std::vector<MatrixXd> z_;
  std::vector<std::vector<VectorXd>> alpha_;
  std::vector<std::vector<VectorXd>> pre_att_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class GnnModel {
 public:
  GnnModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(init_seed, "model-init"));
    const int L = cfg_.num_layers;
    auto layer_dims = [&](int li) -> std::pair<int, int> {
      int in = li == 0 ? cfg_.input_dim : layers_[li - 1]->output_dim();
      bool last = li == L - 1;
      int out;
      if (cfg_.final_linear)
        out = cfg_.hidden_dim;  // all arch layers are hidden; classifier follows
      else
        out = last ? cfg_.output_dim : cfg_.hidden_dim;
      return {in, out};
    };
    for (int li = 0; li < L; ++li) {
      auto [in, out] = layer_dims(li);
      bool last_arch = li == L - 1;
      bool use_relu = cfg_.final_linear || !last_arch;
      switch (cfg_.arch) {
        case Arch::GIN:
          layers_.push_back(std::make_unique<GinLayer>(in, out, use_relu, rng));
          break;
        case Arch::SAGE:
          layers_.push_back(std::make_unique<SageLayer>(in, out, use_relu, rng));
          break;
        case Arch::GAT: {
          // concat between layers, average at the classification layer
          bool concat = cfg_.final_linear || !last_arch;
          layers_.push_back(std::make_unique<GatLayer>(in, out, cfg_.attention_heads,
                                                       concat, use_relu, rng));
          break;
        }
      }
    }
    if (cfg_.final_linear)
      classifier_.emplace(layers_.back()->output_dim(), cfg_.output_dim, rng);
  }

  const ModelConfig& config() const { return cfg_; }

  /// Output dim of the penultimate (embedding) stage.
  int embedding_dim() const {
    int idx = embedding_layer_index();
    return idx < 0 ? cfg_.input_dim : layers_[idx]->output_dim();
  }

  struct Result {
    MatrixXd output;     // logits (target) or response-mimicking output (surrogate)
    MatrixXd embedding;  // penultimate-layer representation
  };

  /// Full-graph layer-wise forward with per-layer fanout sampling. Because a
  /// node's layer-k value depends only on its k-hop neighborhood, this equals
  /// evaluating each node on its own l-hop subgraph.
  Result forward(const MessageGraph& mg, const MatrixXd& x, std::uint64_t sample_seed,
                 bool training) {
    if (x.cols() != cfg_.input_dim)
      throw ValidationError("forward: feature dim " + std::to_string(x.cols()) +
                            " does not match model input dim " +
                            std::to_string(cfg_.input_dim));
    if (x.rows() != mg.n) throw ValidationError("forward: feature rows != node count");
    samples_.clear();
    masks_.clear();
    samples_.reserve(cfg_.num_layers);  // layers keep pointers into samples_
    masks_.reserve(cfg_.num_layers);
    Result res;
    MatrixXd h = x;
    const int embed_idx = embedding_layer_index();
    if (embed_idx < 0) res.embedding = h;
    for (int li = 0; li < cfg_.num_layers; ++li) {
      Rng srng(mix_seed(sample_seed, "sample-layer", li));
      samples_.push_back(sample_neighbors(mg, cfg_.fanouts[li], srng));
      if (training && cfg_.dropout > 0.0) {
        Rng drng(mix_seed(sample_seed, "dropout-layer", li));
        MatrixXd mask(h.rows(), h.cols());
        double keep = 1.0 - cfg_.dropout;
        for (Eigen::Index i = 0; i < h.rows(); ++i)
          for (Eigen::Index j = 0; j < h.cols(); ++j)
            mask(i, j) = drng.bernoulli(keep) ? 1.0 / keep : 0.0;
        masks_.push_back(mask);
        h = h.cwiseProduct(mask);
      } else {
        masks_.emplace_back();
      }
      h = layers_[li]->forward(h, samples_.back());
      if (li == embed_idx) res.embedding = h;
    }
    res.output = classifier_ ? classifier_->forward(h) : h;
    return res;
  }

  /// Backprop through the whole stack; returns d(features).
  MatrixXd backward(const MatrixXd& d_output) {
    MatrixXd d = classifier_ ? classifier_->backward(d_output) : d_output;
    for (int li = cfg_.num_layers - 1; li >= 0; --li) {
      d = layers_[li]->backward(d);
      if (masks_[li].size() > 0) d = d.cwiseProduct(masks_[li]);
    }
    return d;
  }

  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> out;
    for (std::size_t li = 0; li < layers_.size(); ++li)
      layers_[li]->collect("layer" + std::to_string(li), out);
    if (classifier_) {
      out.push_back({"classifier.weight", &classifier_->weight, &classifier_->grad_weight});
      out.push_back({"classifier.bias", &classifier_->bias, &classifier_->grad_bias});
    }
    return out;
  }

  void zero_grads() {
    for (auto& l : layers_) l->zero_grads();
    if (classifier_) classifier_->zero_grads();
  }

  std::vector<MatrixXd> snapshot() {
    std::vector<MatrixXd> out;
    for (auto& p : parameters()) out.push_back(*p.value);
    return out;
  }

  void restore(const std::vector<MatrixXd>& snap) {
    auto ps = parameters();
    if (snap.size() != ps.size()) throw ValidationError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i].value = snap[i];
  }

 private:
  int embedding_layer_index() const {
    if (cfg_.role == RoleKind::Surrogate) return cfg_.num_layers - 1;
    return cfg_.final_linear ? cfg_.num_layers - 1 : cfg_.num_layers - 2;
  }

  ModelConfig cfg_;
  std::vector<std::unique_ptr<GnnLayer>> layers_;
  std::optional<Linear> classifier_;
  std::vector<NeighborLists> samples_;
  std::vector<MatrixXd> masks_;
};

// ---------------------------------------------------------------------------
// Handles, training, prediction
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch;
  double loss;
  double train_acc;
  double val_acc;
};

/// A trained model. The wrapped GnnModel is mutated only through training;
/// treat a finished handle as read-only.
struct ModelHandle {
  ModelConfig config;
  std::shared_ptr<GnnModel> model;
  std::vector<EpochRecord> training_log;

  GnnModel& net() const {
    if (!model) throw ValidationError("model handle is empty");
    return *model;
  }
};

enum class LossKind { CrossEntropy, Contrastive, Rmse };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::Contrastive: return "contrastive";
    default: return "rmse";
  }
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  LossKind loss = LossKind::CrossEntropy;
  std::uint64_t seed = 0;
  double validation_frac = 0.1;
};

/// Supervised target training: cross-entropy on train nodes with 10% of them
/// held out for validation; returns the epoch snapshot with the best
/// validation accuracy (latest wins ties, so equal-scoring later epochs with
/// lower training loss are preferred).
inline ModelHandle train_target(const Graph& graph, const std::vector<int>& train_nodes,
                                const ModelConfig& config, const TrainConfig& tcfg) {
  if (config.role != RoleKind::Target)
    throw ValidationError("train_target: config role must be target");
  if (tcfg.loss != LossKind::CrossEntropy)
    throw ValidationError("train_target: targets train with cross-entropy");
  if (tcfg.epochs <= 0 || tcfg.learning_rate <= 0)
    throw ValidationError("train_target: epochs and learning rate must be positive");
  {
    std::set<int> distinct;
    for (int v : train_nodes) distinct.insert(graph.labels[v]);
    if (static_cast<int>(distinct.size()) < graph.num_classes)
      throw ValidationError("train_target: train nodes cover " +
                            std::to_string(distinct.size()) + " of " +
                            std::to_string(graph.num_classes) + " classes");
  }

  std::vector<int> nodes = train_nodes;
  Rng rng(mix_seed(tcfg.seed, "target-valsplit"));
  rng.shuffle(nodes);
  int n_val = std::max(1, static_cast<int>(std::floor(nodes.size() * tcfg.validation_frac)));
  if (n_val >= static_cast<int>(nodes.size()))
    throw ValidationError("train_target: not enough nodes for a validation split");
  std::vector<int> val_nodes(nodes.begin(), nodes.begin() + n_val);
  std::vector<int> fit_nodes(nodes.begin() + n_val, nodes.end());

  ModelHandle handle;
  handle.config = config;
  handle.model = std::make_shared<GnnModel>(config, mix_seed(tcfg.seed, "target-init"));
  GnnModel& model = *handle.model;
  MessageGraph mg = MessageGraph::from_graph(graph);
  Adam opt(tcfg.learning_rate);

  auto labels_of = [&](const std::vector<int>& vs) {
    std::vector<int> out;
    out.reserve(vs.size());
    for (int v : vs) out.push_back(graph.labels[v]);
    return out;
  };
  std::vector<int> fit_labels = labels_of(fit_nodes);
  std::vector<int> val_labels = labels_of(val_nodes);
  const std::uint64_t eval_seed = mix_seed(tcfg.seed, "target-eval-sample");

  double best_val = -1.0;
  std::vector<MatrixXd> best_snap;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    model.zero_grads();
    auto res = model.forward(mg, graph.features, mix_seed(tcfg.seed, "target-sample", epoch),
                             /*training=*/true);
    MatrixXd fit_logits(fit_nodes.size(), config.output_dim);
    for (std::size_t i = 0; i < fit_nodes.size(); ++i)
      fit_logits.row(i) = res.output.row(fit_nodes[i]);
    MatrixXd d_fit;
    double loss = cross_entropy(fit_logits, fit_labels, &d_fit);
    MatrixXd d_out = MatrixXd::Zero(res.output.rows(), res.output.cols());
    for (std::size_t i = 0; i < fit_nodes.size(); ++i)
      d_out.row(fit_nodes[i]) = d_fit.row(i);
    model.backward(d_out);
    std::vector<MatrixXd*> params;
    std::vector<const MatrixXd*> grads;
    for (auto& p : model.parameters()) {
      params.push_back(p.value);
      grads.push_back(p.grad);
    }
    opt.step(params, grads);

    auto eval = model.forward(mg, graph.features, eval_seed, /*training=*/false);
    auto pick = [&](const std::vector<int>& vs) {
      std::vector<int> pred;
      pred.reserve(vs.size());
      for (int v : vs) pred.push_back(argmax_row(eval.output.row(v)));
      return pred;
    };
    double train_acc = accuracy_on(pick(fit_nodes), fit_labels);
    double val_acc = accuracy_on(pick(val_nodes), val_labels);
    handle.training_log.push_back({epoch, loss, train_acc, val_acc});
    if (val_acc >= best_val) {
      best_val = val_acc;
      best_snap = model.snapshot();
    }
  }
  model.restore(best_snap);
  return handle;
}

/// Per-node outputs (logits for targets, response-space outputs for
/// surrogates) for the requested nodes; deterministic given the seed.
inline MatrixXd forward_outputs(const ModelHandle& handle, const Graph& graph,
                                const std::vector<int>& nodes, std::uint64_t seed) {
  MessageGraph mg = MessageGraph::from_graph(graph);
  auto res = handle.net().forward(mg, graph.features, seed, /*training=*/false);
  MatrixXd out(nodes.size(), res.output.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0 || nodes[i] >= graph.n)
      throw ValidationError("forward_outputs: node index out of range");
    out.row(i) = res.output.row(nodes[i]);
  }
  return out;
}

/// Penultimate-layer embeddings for the requested nodes.
inline MatrixXd forward_embeddings(const ModelHandle& handle, const Graph& graph,
                                   const std::vector<int>& nodes, std::uint64_t seed) {
  MessageGraph mg = MessageGraph::from_graph(graph);
  auto res = handle.net().forward(mg, graph.features, seed, /*training=*/false);
  MatrixXd out(nodes.size(), res.embedding.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0 || nodes[i] >= graph.n)
      throw ValidationError("forward_embeddings: node index out of range");
    out.row(i) = res.embedding.row(nodes[i]);
  }
  return out;
}

/// Class predictions; ties broken toward the lowest class index. Surrogates
/// need the classification head.
inline std::vector<int> predict(const ModelHandle& handle, const ClassifierHead* head,
                                const Graph& graph, const std::vector<int>& nodes,
                                std::uint64_t seed) {
  if (handle.config.role == RoleKind::Surrogate) {
    if (!head)
      throw ValidationError("predict: surrogate outputs embeddings; classifier head required");
    MatrixXd emb = forward_outputs(handle, graph, nodes, seed);
    return argmax_rows(head->logits(emb));
  }
  return argmax_rows(forward_outputs(handle, graph, nodes, seed));
}

// ---------------------------------------------------------------------------
// Serialization: config.json + shapes.json + weights.bin (little-endian f32)
// ---------------------------------------------------------------------------

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"arch", to_string(c.arch)},
          {"role", c.role == RoleKind::Target ? "target" : "surrogate"},
          {"inputDim", c.input_dim},
          {"hiddenDim", c.hidden_dim},
          {"outputDim", c.output_dim},
          {"numLayers", c.num_layers},
          {"fanouts", c.fanouts},
          {"attentionHeads", c.attention_heads},
          {"dropout", c.dropout},
          {"finalLinear", c.final_linear},
          {"aggregator", c.arch == Arch::SAGE ? "gcn" : ""}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  c.role = j.at("role").get<std::string>() == "target" ? RoleKind::Target
                                                       : RoleKind::Surrogate;
  c.input_dim = j.at("inputDim").get<int>();
  c.hidden_dim = j.at("hiddenDim").get<int>();
  c.output_dim = j.at("outputDim").get<int>();
  c.num_layers = j.at("numLayers").get<int>();
  c.fanouts = j.at("fanouts").get<std::vector<int>>();
  c.attention_heads = j.at("attentionHeads").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.final_linear = j.at("finalLinear").get<bool>();
  return c;
}

inline void save_model(const ModelHandle& handle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    nlohmann::json j = model_config_to_json(handle.config);
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : handle.training_log)
      log.push_back({{"epoch", r.epoch},
                     {"loss", r.loss},
                     {"trainAcc", r.train_acc},
                     {"valAcc", r.val_acc}});
    j["trainingLog"] = log;
    out << j.dump(2) << "\n";
  }
  auto params = handle.net().parameters();
  {
    nlohmann::json shapes = nlohmann::json::array();
    for (auto& p : params)
      shapes.push_back({{"name", p.name},
                        {"rows", p.value->rows()},
                        {"cols", p.value->cols()}});
    std::ofstream out(dir / "shapes.json");
    out << shapes.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    for (auto& p : params) {
      const MatrixXd& m = *p.value;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          float f = static_cast<float>(m(i, j));
          out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
      }
    }
  }
}

inline ModelHandle load_model(const std::filesystem::path& dir) {
  std::ifstream cfg_in(dir / "config.json");
  if (!cfg_in) throw IngestError("model dir " + dir.string() + ": missing config.json");
  nlohmann::json j;
  cfg_in >> j;
  ModelHandle handle;
  handle.config = model_config_from_json(j);
  if (j.contains("trainingLog")) {
    for (const auto& r : j["trainingLog"])
      handle.training_log.push_back({r.at("epoch").get<int>(), r.at("loss").get<double>(),
                                     r.at("trainAcc").get<double>(),
                                     r.at("valAcc").get<double>()});
  }
  handle.model = std::make_shared<GnnModel>(handle.config, /*init_seed=*/0);

  std::ifstream shapes_in(dir / "shapes.json");
  if (!shapes_in) throw IngestError("model dir " + dir.string() + ": missing shapes.json");
  nlohmann::json shapes;
  shapes_in >> shapes;
  auto params = handle.net().parameters();
  if (shapes.size() != params.size())
    throw IngestError("model dir " + dir.string() + ": shape manifest size mismatch");

  std::ifstream win(dir / "weights.bin", std::ios::binary);
  if (!win) throw IngestError("model dir " + dir.string() + ": missing weights.bin");
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& s = shapes[pi];
    if (s.at("name").get<std::string>() != params[pi].name ||
        s.at("rows").get<Eigen::Index>() != params[pi].value->rows() ||
        s.at("cols").get<Eigen::Index>() != params[pi].value->cols())
      throw IngestError("model dir " + dir.string() + ": parameter '" + params[pi].name +
                        "' shape mismatch");
    MatrixXd& m = *params[pi].value;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        float f;
        if (!win.read(reinterpret_cast<char*>(&f), sizeof(float)))
          throw IngestError("model dir " + dir.string() + ": weights.bin truncated");
        m(i, j) = static_cast<double>(f);
      }
    }
  }
  return handle;
}

}  // namespace gnnsteal
