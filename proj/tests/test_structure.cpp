#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "gnnsteal/oracle.hpp"
#include "gnnsteal/structure.hpp"

using namespace gnnsteal;
using Catch::Approx;

namespace {

// two feature blobs with higher within-blob than cross-blob cosine
Eigen::MatrixXd two_blobs(int per_blob, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(2 * per_blob, dim);
  for (int i = 0; i < 2 * per_blob; ++i) {
    int blob = i < per_blob ? 0 : 1;
    for (int j = 0; j < dim; ++j) x(i, j) = rng.normal(0.0, 0.3);
    x(i, blob) += 4.0;
  }
  return x;
}

}  // namespace

TEST_CASE("knn output is symmetric, non-negative, zero-diagonal", "[structure]") {
  Eigen::MatrixXd x = two_blobs(10, 6, 3);
  StructureConfig cfg;
  cfg.k = 4;
  Eigen::MatrixXd a = knn_init(x, cfg);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("knn with orthogonal one-hot features is deterministic", "[structure]") {
  // all similarities are zero; tie-break by lowest index keeps the result
  // reproducible (and at zero weight)
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(8, 8);
  StructureConfig cfg;
  cfg.k = 3;
  Eigen::MatrixXd a1 = knn_init(x, cfg);
  Eigen::MatrixXd a2 = knn_init(x, cfg);
  CHECK(a1 == a2);
  CHECK(a1.isZero(0.0));  // zero similarity carries zero weight
}

TEST_CASE("knn requires n >= k+1", "[structure]") {
  StructureConfig cfg;
  cfg.k = 10;
  CHECK_THROWS_AS(knn_init(Eigen::MatrixXd::Random(5, 3), cfg), ValidationError);
}

TEST_CASE("knn neighbors stay inside their feature blob", "[structure]") {
  const int per = 12;
  Eigen::MatrixXd x = two_blobs(per, 8, 7);
  StructureConfig cfg;
  cfg.k = 3;
  Eigen::MatrixXd a = knn_init(x, cfg);
  // brute-force check against the plain cosine similarity matrix
  for (int i = 0; i < 2 * per; ++i)
    for (int j = 0; j < 2 * per; ++j)
      if (a(i, j) > 0.0) CHECK((i < per) == (j < per));
}

TEST_CASE("zero refinement rounds return the initial graph", "[structure]") {
  Eigen::MatrixXd x = two_blobs(8, 5, 9);
  StructureConfig cfg;
  cfg.k = 3;
  cfg.refine_iters = 0;
  Eigen::MatrixXd a0 = knn_init(x, cfg);
  Eigen::MatrixXd aq = refine_structure(a0, x, Eigen::MatrixXd::Random(16, 4), cfg);
  CHECK(aq == a0);
}

TEST_CASE("joint loss is non-increasing across refinement rounds", "[structure]") {
  Eigen::MatrixXd x = two_blobs(10, 6, 11);
  StructureConfig cfg;
  cfg.k = 4;
  cfg.refine_iters = 4;
  cfg.seed = 3;
  StructureLearner learner(cfg, 6, 3);
  Eigen::MatrixXd a0 = learner.knn_init(x);
  Rng rng(5);
  Eigen::MatrixXd responses(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j) responses(i, j) = rng.normal() + (i < 10 ? 1.5 : -1.5);
  learner.refine(a0, x, responses);
  const auto& losses = learner.loss_curve();
  REQUIRE(losses.size() == 4);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-3);
}

TEST_CASE("refined structure keeps the required invariants", "[structure]") {
  Eigen::MatrixXd x = two_blobs(9, 7, 13);
  StructureConfig cfg;
  cfg.k = 4;
  cfg.seed = 5;
  StructureLearner learner(cfg, 7, 2);
  Eigen::MatrixXd a0 = learner.knn_init(x);
  Eigen::MatrixXd aq = learner.refine(a0, x, Eigen::MatrixXd::Random(18, 2));
  CHECK((aq - aq.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(aq.minCoeff() >= 0.0);
  CHECK(aq.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("refinement never touches the oracle", "[structure]") {
  Graph g = generate_sbm({20, 20}, 0.3, 0.05, 6, 15, 2.5);
  ModelConfig mc = target_config(Arch::GIN, 6, 2);
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = 2;
  std::vector<int> nodes(g.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  ModelHandle target = train_target(g, nodes, mc, tc);
  VictimOracle oracle(target, {}, -1, {}, 1);

  StructureConfig cfg;
  cfg.k = 5;
  StructureLearner learner(cfg, 6, 0);
  Eigen::MatrixXd a0 = learner.knn_init(g.features);
  Graph g0 = graph_with_learned_structure(g, a0);
  Eigen::MatrixXd responses = oracle.answer_query(g0, nodes, ResponseKind::Embedding);
  long before = oracle.ledger().total_node_queries;

  StructureLearner refiner(cfg, 6, static_cast<int>(responses.cols()));
  refiner.refine(a0, g.features, responses);
  CHECK(oracle.ledger().total_node_queries == before);
}

TEST_CASE("learned adjacency round-trips through the weighted edge format", "[structure]") {
  namespace fs = std::filesystem;
  Eigen::MatrixXd x = two_blobs(8, 5, 21);
  StructureConfig cfg;
  cfg.k = 3;
  Eigen::MatrixXd a = knn_init(x, cfg);
  auto path = fs::temp_directory_path() / "gnnsteal_learned_edges.tsv";
  save_weighted_edges(a, path);
  Eigen::MatrixXd back = load_weighted_edges(path, static_cast<int>(a.rows()));
  CHECK((a - back).cwiseAbs().maxCoeff() == 0.0);  // %.17g is lossless
}

TEST_CASE("type II attack runs end to end and reports query parity", "[structure]") {
  Graph full = generate_sbm({30, 30}, 0.3, 0.03, 8, 23, 2.5);
  SplitSpec ss;
  ss.seed = 7;
  NodeSplit split = split_nodes(full, ss);
  Graph train_sub = induced_subgraph(full, split.target_train).graph;
  Graph query_sub = induced_subgraph(full, split.query).graph;
  Graph test_sub = induced_subgraph(full, split.test).graph;
  ModelConfig mc = target_config(Arch::GIN, full.feature_dim(), 2);
  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 3;
  std::vector<int> nodes(train_sub.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  ModelHandle target = train_target(train_sub, nodes, mc, tc);
  VictimOracle oracle(target, {}, -1, {}, 4);

  Graph featureless = query_sub;
  featureless.edges.clear();

  StructureConfig st;
  st.k = 5;
  st.seed = 9;
  StealConfig sc;
  sc.epochs = 25;
  sc.head_epochs = 120;
  sc.loss = LossKind::Rmse;
  sc.response_kind = ResponseKind::Embedding;
  sc.seed = 13;
  StealResult result = steal_type2(oracle, featureless, st, sc);
  CHECK(result.queries_used == query_sub.n);
  CHECK(oracle.ledger().total_node_queries == query_sub.n);
  Metrics m = evaluate_surrogate(result, target, test_sub, 2);
  CHECK(m.accuracy > 0.5);  // well above 0.5-class chance on a separable toy
}
