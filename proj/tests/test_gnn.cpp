#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "gnnsteal/gnn.hpp"

using namespace gnnsteal;
using Catch::Approx;

namespace {

double rel_diff(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-8); }

// ReLU/LeakyReLU kinks make central differences meaningless when the step
// straddles the kink; detect that by comparing the one-sided slopes
bool straddles_kink(double fp, double f0, double fm, double h) {
  double fwd = (fp - f0) / h, bwd = (f0 - fm) / h;
  return rel_diff(fwd, bwd) > 1e-2;
}

NeighborLists random_neighbors(int n, Rng& rng, bool weighted) {
  NeighborLists ns(n);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (u == v || !rng.bernoulli(0.4)) continue;
      double w = weighted ? rng.uniform(-1.0, 1.0) : 1.0;
      ns[v].emplace_back(u, w);
    }
  }
  return ns;
}

/// loss = sum(layer(H) ⊙ R); checks dH and every parameter against central FD
template <typename LayerT>
void gradcheck_layer(LayerT& layer, int n, int in_dim, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd h(n, in_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < in_dim; ++j) h(i, j) = rng.normal();
  NeighborLists ns = random_neighbors(n, rng, /*weighted=*/true);
  MatrixXd out = layer.forward(h, ns);
  MatrixXd sensitivity(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) sensitivity(i, j) = rng.normal();
  layer.zero_grads();
  layer.forward(h, ns);
  MatrixXd dh = layer.backward(sensitivity);
  std::vector<ParamRef> params;
  layer.collect("p", params);
  const double fd_h = 1e-6;

  for (auto& p : params) {
    for (Eigen::Index i = 0; i < p.value->rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value->cols(); ++j) {
        LayerT lp = layer, lm = layer;
        std::vector<ParamRef> pp, pm;
        lp.collect("p", pp);
        lm.collect("p", pm);
        for (std::size_t k = 0; k < params.size(); ++k)
          if (pp[k].name == p.name && pp[k].value->rows() == p.value->rows()) {
          }
        // locate the matching parameter in the copies by name
        MatrixXd* vp = nullptr;
        MatrixXd* vm = nullptr;
        for (auto& r : pp)
          if (r.name == p.name) vp = r.value;
        for (auto& r : pm)
          if (r.name == p.name) vm = r.value;
        REQUIRE(vp != nullptr);
        (*vp)(i, j) += fd_h;
        (*vm)(i, j) -= fd_h;
        double fp = (lp.forward(h, ns).cwiseProduct(sensitivity)).sum();
        double fm = (lm.forward(h, ns).cwiseProduct(sensitivity)).sum();
        LayerT l0 = layer;
        double f0 = (l0.forward(h, ns).cwiseProduct(sensitivity)).sum();
        if (straddles_kink(fp, f0, fm, fd_h)) continue;
        double fd = (fp - fm) / (2 * fd_h);
        INFO(p.name << "(" << i << "," << j << ")");
        CHECK(rel_diff(fd, (*p.grad)(i, j)) < 1e-4);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < in_dim; ++j) {
      MatrixXd hp = h, hm = h;
      hp(i, j) += fd_h;
      hm(i, j) -= fd_h;
      LayerT scratch = layer;
      double fp = (scratch.forward(hp, ns).cwiseProduct(sensitivity)).sum();
      double fm = (scratch.forward(hm, ns).cwiseProduct(sensitivity)).sum();
      double f0 = (scratch.forward(h, ns).cwiseProduct(sensitivity)).sum();
      if (straddles_kink(fp, f0, fm, fd_h)) continue;
      double fd = (fp - fm) / (2 * fd_h);
      INFO("dH(" << i << "," << j << ")");
      CHECK(rel_diff(fd, dh(i, j)) < 1e-4);
    }
  }
}

Graph separable_toy(std::uint64_t seed) {
  return generate_sbm({12, 12}, 0.7, 0.05, 6, seed, 3.0);
}

std::vector<int> all_nodes(const Graph& g) {
  std::vector<int> v(g.n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("GIN layer gradients match finite differences", "[gnn]") {
  for (std::uint64_t s : {1u, 2u, 3u}) {
    Rng rng(s);
    GinLayer layer(5, 4, /*use_relu=*/s % 2 == 0, rng);
    gradcheck_layer(layer, 6, 5, 40 + s);
  }
}

TEST_CASE("SAGE layer gradients match finite differences", "[gnn]") {
  for (std::uint64_t s : {1u, 2u, 3u}) {
    Rng rng(s);
    SageLayer layer(5, 4, s % 2 == 0, rng);
    gradcheck_layer(layer, 6, 5, 50 + s);
  }
}

TEST_CASE("GAT layer gradients match finite differences", "[gnn]") {
  for (std::uint64_t s : {1u, 2u}) {
    Rng rng(s);
    GatLayer concat_layer(5, 3, 2, /*concat=*/true, s % 2 == 0, rng);
    gradcheck_layer(concat_layer, 5, 5, 60 + s);
    GatLayer avg_layer(4, 3, 2, /*concat=*/false, false, rng);
    gradcheck_layer(avg_layer, 5, 4, 70 + s);
  }
}

TEST_CASE("full model gradient matches finite differences through all layers", "[gnn]") {
  Graph g = generate_sbm({4, 4}, 0.6, 0.3, 5, 2, 1.0);
  MessageGraph mg = MessageGraph::from_graph(g);
  for (Arch arch : {Arch::GIN, Arch::SAGE, Arch::GAT}) {
    ModelConfig cfg = target_config(arch, 5, 3);
    cfg.hidden_dim = 6;
    cfg.dropout = 0.0;
    GnnModel model(cfg, 7);
    Rng rng(9);
    auto res = model.forward(mg, g.features, 1, false);
    MatrixXd sens(res.output.rows(), res.output.cols());
    for (Eigen::Index i = 0; i < sens.rows(); ++i)
      for (Eigen::Index j = 0; j < sens.cols(); ++j) sens(i, j) = rng.normal();
    model.zero_grads();
    model.forward(mg, g.features, 1, false);
    model.backward(sens);
    auto params = model.parameters();
    // spot-check a handful of entries in every parameter tensor
    for (auto& p : params) {
      for (int trial = 0; trial < 3; ++trial) {
        Eigen::Index i = trial % p.value->rows();
        Eigen::Index j = (trial * 7) % p.value->cols();
        double orig = (*p.value)(i, j);
        const double h = 1e-6;
        (*p.value)(i, j) = orig + h;
        double fp = (model.forward(mg, g.features, 1, false).output.cwiseProduct(sens)).sum();
        (*p.value)(i, j) = orig - h;
        double fm = (model.forward(mg, g.features, 1, false).output.cwiseProduct(sens)).sum();
        (*p.value)(i, j) = orig;
        double f0 = (model.forward(mg, g.features, 1, false).output.cwiseProduct(sens)).sum();
        if (straddles_kink(fp, f0, fm, h)) continue;
        double fd = (fp - fm) / (2 * h);
        INFO(to_string(arch) << " " << p.name);
        CHECK(rel_diff(fd, (*p.grad)(i, j)) < 1e-4);
      }
    }
  }
}

TEST_CASE("target configs match the reference architectures", "[gnn]") {
  auto gin = target_config(Arch::GIN, 100, 7);
  CHECK(gin.num_layers == 3);
  CHECK(gin.fanouts == std::vector<int>{10, 10, 10});
  CHECK(gin.hidden_dim == 128);
  CHECK(gin.dropout == 0.5);
  CHECK_FALSE(gin.final_linear);
  auto gat = target_config(Arch::GAT, 100, 7);
  CHECK(gat.num_layers == 3);
  CHECK(gat.attention_heads == 4);
  auto sage = target_config(Arch::SAGE, 100, 7);
  CHECK(sage.num_layers == 2);
  CHECK(sage.fanouts == std::vector<int>{25, 10});
  CHECK(sage.final_linear);

  auto surr = surrogate_config(Arch::GIN, 100, 64);
  CHECK(surr.num_layers == 2);
  CHECK(surr.fanouts == std::vector<int>{10, 50});
  CHECK(surr.hidden_dim == 128);
  CHECK(surr.output_dim == 64);

  // embedding dims: GIN 128, GAT 4*128 concat, SAGE 128
  CHECK(GnnModel(gin, 1).embedding_dim() == 128);
  CHECK(GnnModel(gat, 1).embedding_dim() == 512);
  CHECK(GnnModel(sage, 1).embedding_dim() == 128);
}

TEST_CASE("isolated node output depends only on its own features", "[gnn]") {
  Graph g;
  g.n = 3;
  g.edges = {{0, 1}};  // node 2 isolated
  g.features.resize(3, 4);
  g.features << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  g.labels = {0, 1, 0};
  g.num_classes = 2;
  ModelConfig cfg = surrogate_config(Arch::GIN, 4, 3);
  GnnModel model(cfg, 5);
  MessageGraph mg = MessageGraph::from_graph(g);
  auto out1 = model.forward(mg, g.features, 1, false).output;
  Graph g2 = g;
  g2.features.row(0) << -9, -9, -9, -9;  // change a connected node
  auto out2 = model.forward(mg, g2.features, 1, false).output;
  CHECK(out1.row(2) == out2.row(2));
  CHECK(out1.row(1) != out2.row(1));
}

TEST_CASE("forward is sampling-free when fanout covers every degree", "[gnn]") {
  Graph g = separable_toy(3);
  ModelConfig cfg = surrogate_config(Arch::SAGE, 6, 4);
  cfg.fanouts = {1000, 1000};
  GnnModel model(cfg, 8);
  MessageGraph mg = MessageGraph::from_graph(g);
  auto a = model.forward(mg, g.features, 111, false).output;
  auto b = model.forward(mg, g.features, 999, false).output;
  CHECK(a == b);
}

TEST_CASE("forward is permutation-equivariant with dropout 0 and full fanout", "[gnn]") {
  Graph g = separable_toy(5);
  std::vector<int> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(17);
  rng.shuffle(perm);  // perm[old] = position of old node in... we use new[i]=old perm
  // build relabeled graph: node i of g2 is node perm[i] of g
  Graph g2;
  g2.n = g.n;
  g2.num_classes = g.num_classes;
  g2.features.resize(g.n, g.feature_dim());
  g2.labels.resize(g.n);
  std::vector<int> inv(g.n);
  for (int i = 0; i < g.n; ++i) inv[perm[i]] = i;
  for (int i = 0; i < g.n; ++i) {
    g2.features.row(i) = g.features.row(perm[i]);
    g2.labels[i] = g.labels[perm[i]];
  }
  for (auto [a, b] : g.edges) {
    int x = inv[a], y = inv[b];
    g2.edges.emplace_back(std::min(x, y), std::max(x, y));
  }
  for (Arch arch : {Arch::GIN, Arch::SAGE, Arch::GAT}) {
    ModelConfig cfg = surrogate_config(arch, g.feature_dim(), 5);
    cfg.fanouts = {1000, 1000};
    GnnModel model(cfg, 23);
    auto out1 = model.forward(MessageGraph::from_graph(g), g.features, 1, false).output;
    auto out2 = model.forward(MessageGraph::from_graph(g2), g2.features, 1, false).output;
    for (int i = 0; i < g.n; ++i) {
      INFO(to_string(arch) << " node " << i);
      CHECK((out1.row(perm[i]) - out2.row(i)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("SAGE layer matches hand-computed mean aggregation on a path", "[gnn]") {
  // path 0-1-2: M_0=(x0+x1)/2, M_1=(x0+x1+x2)/3, M_2=(x1+x2)/2 with identity weights
  Rng rng(1);
  SageLayer layer(2, 2, /*use_relu=*/false, rng);
  std::vector<ParamRef> params;
  layer.collect("sage", params);
  *params[0].value = MatrixXd::Identity(2, 2);  // weight
  params[1].value->setZero();                   // bias
  MatrixXd h(3, 2);
  h << 1, 0, 0, 1, 1, 1;
  NeighborLists ns(3);
  ns[0] = {{1, 1.0}};
  ns[1] = {{0, 1.0}, {2, 1.0}};
  ns[2] = {{1, 1.0}};
  MatrixXd out = layer.forward(h, ns);
  CHECK(out(0, 0) == Approx(0.5));
  CHECK(out(0, 1) == Approx(0.5));
  CHECK(out(1, 0) == Approx(2.0 / 3));
  CHECK(out(1, 1) == Approx(2.0 / 3));
  CHECK(out(2, 0) == Approx(0.5));
  CHECK(out(2, 1) == Approx(1.0));
}

TEST_CASE("train_target reaches perfect accuracy on a separable toy", "[gnn]") {
  Graph g = separable_toy(9);
  ModelConfig cfg = target_config(Arch::GIN, g.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 120;
  tc.seed = 4;
  std::vector<int> train_nodes;
  for (int i = 0; i < g.n; i += 2) train_nodes.push_back(i);
  ModelHandle h = train_target(g, train_nodes, cfg, tc);
  std::vector<int> eval_nodes;
  for (int i = 1; i < g.n; i += 2) eval_nodes.push_back(i);
  auto preds = predict(h, nullptr, g, eval_nodes, 7);
  std::vector<int> truth;
  for (int v : eval_nodes) truth.push_back(g.labels[v]);
  CHECK(accuracy_on(preds, truth) == 1.0);
}

TEST_CASE("train_target is deterministic per seed", "[gnn]") {
  Graph g = separable_toy(12);
  ModelConfig cfg = target_config(Arch::SAGE, g.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = 6;
  auto h1 = train_target(g, all_nodes(g), cfg, tc);
  auto h2 = train_target(g, all_nodes(g), cfg, tc);
  REQUIRE(h1.training_log.size() == h2.training_log.size());
  for (std::size_t i = 0; i < h1.training_log.size(); ++i) {
    CHECK(h1.training_log[i].loss == h2.training_log[i].loss);
    CHECK(h1.training_log[i].val_acc == h2.training_log[i].val_acc);
  }
}

TEST_CASE("train_target selects the best validation epoch", "[gnn]") {
  Graph g = separable_toy(14);
  ModelConfig cfg = target_config(Arch::GIN, g.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 25;
  tc.seed = 8;
  ModelHandle h = train_target(g, all_nodes(g), cfg, tc);
  // replicate the internal validation split to score the returned snapshot
  std::vector<int> nodes = all_nodes(g);
  Rng rng(mix_seed(tc.seed, "target-valsplit"));
  rng.shuffle(nodes);
  int n_val = std::max(1, static_cast<int>(std::floor(nodes.size() * tc.validation_frac)));
  std::vector<int> val_nodes(nodes.begin(), nodes.begin() + n_val);
  auto eval = h.net().forward(MessageGraph::from_graph(g), g.features,
                              mix_seed(tc.seed, "target-eval-sample"), false);
  std::vector<int> pred, truth;
  for (int v : val_nodes) {
    pred.push_back(argmax_row(eval.output.row(v)));
    truth.push_back(g.labels[v]);
  }
  double returned_val = accuracy_on(pred, truth);
  for (const auto& rec : h.training_log) CHECK(returned_val >= rec.val_acc);
}

TEST_CASE("train_target requires every class in the training nodes", "[gnn]") {
  Graph g = separable_toy(2);
  std::vector<int> one_class;
  for (int i = 0; i < g.n; ++i)
    if (g.labels[i] == 0) one_class.push_back(i);
  ModelConfig cfg = target_config(Arch::GIN, g.feature_dim(), 2);
  CHECK_THROWS_AS(train_target(g, one_class, cfg, TrainConfig{}), ValidationError);
}

TEST_CASE("predict composes forward and argmax", "[gnn]") {
  Graph g = separable_toy(21);
  ModelConfig cfg = target_config(Arch::GIN, g.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 10;
  tc.seed = 3;
  ModelHandle h = train_target(g, all_nodes(g), cfg, tc);
  std::vector<int> nodes{0, 3, 5, 11, 17};
  auto direct = predict(h, nullptr, g, nodes, 42);
  MatrixXd logits = forward_outputs(h, g, nodes, 42);
  CHECK(direct == argmax_rows(logits));
}

TEST_CASE("surrogate predict requires the classifier head", "[gnn]") {
  Graph g = separable_toy(22);
  GnnModel* raw = new GnnModel(surrogate_config(Arch::GIN, g.feature_dim(), 4), 1);
  ModelHandle h;
  h.config = raw->config();
  h.model.reset(raw);
  CHECK_THROWS_AS(predict(h, nullptr, g, {0, 1}, 1), ValidationError);
}

TEST_CASE("model serialization round-trips bit-exactly", "[gnn]") {
  namespace fs = std::filesystem;
  Graph g = separable_toy(30);
  ModelConfig cfg = target_config(Arch::GAT, g.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 4;
  tc.seed = 2;
  ModelHandle h = train_target(g, all_nodes(g), cfg, tc);
  auto dir1 = fs::temp_directory_path() / "gnnsteal_model_a";
  auto dir2 = fs::temp_directory_path() / "gnnsteal_model_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  save_model(h, dir1);
  ModelHandle back = load_model(dir1);
  save_model(back, dir2);
  for (const char* name : {"weights.bin", "shapes.json", "config.json"}) {
    std::ifstream a(dir1 / name, std::ios::binary), b(dir2 / name, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    INFO(name);
    CHECK(sa == sb);
  }
  CHECK(back.config.arch == Arch::GAT);
  CHECK(back.training_log.size() == h.training_log.size());
}
