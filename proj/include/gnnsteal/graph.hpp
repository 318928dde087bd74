#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/rng.hpp"

namespace gnnsteal {

/// Undirected attributed graph with integer class labels.
/// Edges are stored deduplicated with src < dst; the derived adjacency is
/// symmetric by construction. Optional per-edge weights support learned /
/// augmented structures (weight 1.0 everywhere for plain graphs).
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // src < dst, unique
  std::vector<double> edge_weights;        // parallel to edges; empty ⇒ all 1
  Eigen::MatrixXd features;                // n × d
  std::vector<int> labels;                 // length n, values in [0, num_classes)
  int num_classes = 0;
  std::string name;

  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool weighted() const { return !edge_weights.empty(); }

  double weight(std::size_t e) const {
    return edge_weights.empty() ? 1.0 : edge_weights[e];
  }

  /// Neighbor lists (u, w) per node, symmetric.
  std::vector<std::vector<std::pair<int, double>>> adjacency_lists() const {
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [a, b] = edges[e];
      double w = weight(e);
      adj[a].emplace_back(b, w);
      if (a != b) adj[b].emplace_back(a, w);
    }
    return adj;
  }

  Eigen::MatrixXd dense_adjacency() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [a, b] = edges[e];
      A(a, b) = weight(e);
      A(b, a) = weight(e);
    }
    return A;
  }
};

inline void validate_graph(const Graph& g) {
  if (g.n < 0) throw ValidationError("graph: negative node count");
  if (g.features.rows() != g.n)
    throw ValidationError("graph '" + g.name + "': feature matrix has " +
                          std::to_string(g.features.rows()) + " rows, expected " +
                          std::to_string(g.n));
  if (static_cast<int>(g.labels.size()) != g.n)
    throw ValidationError("graph '" + g.name + "': " + std::to_string(g.labels.size()) +
                          " labels, expected " + std::to_string(g.n));
  if (!g.edge_weights.empty() && g.edge_weights.size() != g.edges.size())
    throw ValidationError("graph '" + g.name + "': edge weight count mismatch");
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto [a, b] = g.edges[e];
    if (a < 0 || a >= g.n || b < 0 || b >= g.n)
      throw ValidationError("graph '" + g.name + "': edge " + std::to_string(e) +
                            " endpoint out of range [0, " + std::to_string(g.n) + ")");
  }
  for (int i = 0; i < g.n; ++i) {
    if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
      throw ValidationError("graph '" + g.name + "': label of node " + std::to_string(i) +
                            " outside [0, " + std::to_string(g.num_classes) + ")");
  }
}

/// Canonicalize an edge list: order endpoints, drop duplicates. Self-loops are
/// dropped unless keep_self_loops.
inline std::vector<std::pair<int, int>> dedup_edges(std::vector<std::pair<int, int>> raw,
                                                    bool keep_self_loops = false) {
  for (auto& e : raw) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  if (!keep_self_loops) {
    raw.erase(std::remove_if(raw.begin(), raw.end(),
                             [](const auto& e) { return e.first == e.second; }),
              raw.end());
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Bundle IO. A bundle directory holds meta.json {name, n, d, numClasses},
// edges.tsv (src \t dst), features.tsv (n rows × d cols), labels.tsv.
// Plain text, UTF-8, LF.
// ---------------------------------------------------------------------------

namespace detail {

inline std::ifstream open_bundle_file(const std::filesystem::path& dir, const std::string& file) {
  auto p = dir / file;
  std::ifstream in(p);
  if (!in) throw IngestError("bundle " + dir.string() + ": missing or unreadable " + file);
  return in;
}

}  // namespace detail

inline Graph load_graph_bundle(const std::filesystem::path& dir) {
  nlohmann::json meta;
  {
    auto in = detail::open_bundle_file(dir, "meta.json");
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw IngestError("bundle " + dir.string() + ": meta.json parse error: " + e.what());
    }
  }
  for (const char* key : {"name", "n", "d", "numClasses"}) {
    if (!meta.contains(key))
      throw IngestError("bundle " + dir.string() + ": meta.json missing key '" + key + "'");
  }
  Graph g;
  g.name = meta["name"].get<std::string>();
  g.n = meta["n"].get<int>();
  int d = meta["d"].get<int>();
  g.num_classes = meta["numClasses"].get<int>();
  if (g.n < 0 || d < 0 || g.num_classes <= 0)
    throw IngestError("bundle " + dir.string() + ": non-positive dimensions in meta.json");

  {
    auto in = detail::open_bundle_file(dir, "edges.tsv");
    std::string line;
    int lineno = 0;
    std::vector<std::pair<int, int>> raw;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long a, b;
      if (!(ss >> a >> b))
        throw IngestError("bundle " + dir.string() + ": edges.tsv line " +
                          std::to_string(lineno) + ": expected two integers");
      if (a < 0 || a >= g.n || b < 0 || b >= g.n)
        throw ValidationError("bundle " + dir.string() + ": edges.tsv line " +
                              std::to_string(lineno) + ": node index out of range [0, " +
                              std::to_string(g.n) + ")");
      raw.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
    g.edges = dedup_edges(std::move(raw));
  }

  {
    auto in = detail::open_bundle_file(dir, "features.tsv");
    g.features.resize(g.n, d);
    std::string line;
    for (int i = 0; i < g.n; ++i) {
      if (!std::getline(in, line))
        throw IngestError("bundle " + dir.string() + ": features.tsv: expected " +
                          std::to_string(g.n) + " rows, got " + std::to_string(i));
      std::istringstream ss(line);
      for (int j = 0; j < d; ++j) {
        double v;
        if (!(ss >> v))
          throw IngestError("bundle " + dir.string() + ": features.tsv line " +
                            std::to_string(i + 1) + ": expected " + std::to_string(d) +
                            " values");
        g.features(i, j) = v;
      }
    }
  }

  {
    auto in = detail::open_bundle_file(dir, "labels.tsv");
    g.labels.resize(g.n);
    std::string line;
    for (int i = 0; i < g.n; ++i) {
      if (!std::getline(in, line))
        throw IngestError("bundle " + dir.string() + ": labels.tsv: expected " +
                          std::to_string(g.n) + " rows, got " + std::to_string(i));
      std::istringstream ss(line);
      long c;
      if (!(ss >> c))
        throw IngestError("bundle " + dir.string() + ": labels.tsv line " +
                          std::to_string(i + 1) + ": expected an integer");
      if (c < 0 || c >= g.num_classes)
        throw ValidationError("bundle " + dir.string() + ": labels.tsv line " +
                              std::to_string(i + 1) + ": label outside [0, " +
                              std::to_string(g.num_classes) + ")");
      g.labels[i] = static_cast<int>(c);
    }
  }

  validate_graph(g);
  return g;
}

/// Writes a bundle; load_graph_bundle(save_graph_bundle(g)) == g.
/// Feature decimals use max_digits10 so the round-trip is exact.
inline void save_graph_bundle(const Graph& g, const std::filesystem::path& dir) {
  validate_graph(g);
  std::filesystem::create_directories(dir);
  {
    nlohmann::json meta = {{"name", g.name},
                           {"n", g.n},
                           {"d", g.feature_dim()},
                           {"numClasses", g.num_classes}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (auto [a, b] : g.edges) out << a << "\t" << b << "\n";
  }
  {
    std::ofstream out(dir / "features.tsv");
    char buf[64];
    for (int i = 0; i < g.n; ++i) {
      for (int j = 0; j < g.feature_dim(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.features(i, j));
        out << (j ? "\t" : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (int c : g.labels) out << c << "\n";
  }
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
  double target_train_frac = 0.2;
  double query_frac = 0.3;
  double test_frac = 0.5;
  std::uint64_t seed = 0;
};

struct NodeSplit {
  std::vector<int> target_train;
  std::vector<int> query;
  std::vector<int> test;
};

inline void validate_split_spec(const SplitSpec& s) {
  if (s.target_train_frac <= 0 || s.query_frac <= 0 || s.test_frac <= 0)
    throw ValidationError("split spec: fractions must be positive");
  double sum = s.target_train_frac + s.query_frac + s.test_frac;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split spec: fractions sum to " + std::to_string(sum) +
                          ", expected 1.0");
}

/// Seeded shuffle, then partition: floor(n·trainFrac) / floor(n·queryFrac) /
/// remainder-to-test.
inline NodeSplit split_nodes(const Graph& g, const SplitSpec& spec) {
  validate_split_spec(spec);
  if (g.n < 3)
    throw ValidationError("split_nodes: need n >= 3 to form three non-empty segments");
  std::vector<int> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(spec.seed, "node-split"));
  rng.shuffle(perm);
  // floor with an epsilon so e.g. 4230 * 0.3 (= 1269 - 5e-14 in doubles) lands on 1269
  int n_train = static_cast<int>(std::floor(g.n * spec.target_train_frac + 1e-9));
  int n_query = static_cast<int>(std::floor(g.n * spec.query_frac + 1e-9));
  n_train = std::max(1, n_train);
  n_query = std::max(1, n_query);
  if (n_train + n_query >= g.n)
    throw ValidationError("split_nodes: empty test segment");
  NodeSplit out;
  out.target_train.assign(perm.begin(), perm.begin() + n_train);
  out.query.assign(perm.begin() + n_train, perm.begin() + n_train + n_query);
  out.test.assign(perm.begin() + n_train + n_query, perm.end());
  return out;
}

// ---------------------------------------------------------------------------
// Subgraphs
// ---------------------------------------------------------------------------

struct Subgraph {
  Graph graph;
  std::vector<int> to_original;  // new index -> original index
  int root = -1;                 // new index of the BFS root (k_hop_subgraph only)
};

/// Induced subgraph on the given original-index node set (order preserved).
inline Subgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes) {
  Subgraph out;
  out.to_original = nodes;
  std::vector<int> to_new(g.n, -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int v = nodes[i];
    if (v < 0 || v >= g.n) throw ValidationError("induced_subgraph: node index out of range");
    if (to_new[v] != -1) throw ValidationError("induced_subgraph: duplicate node index");
    to_new[v] = static_cast<int>(i);
  }
  Graph& s = out.graph;
  s.n = static_cast<int>(nodes.size());
  s.name = g.name;
  s.num_classes = g.num_classes;
  s.features.resize(s.n, g.feature_dim());
  s.labels.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    s.features.row(i) = g.features.row(nodes[i]);
    s.labels[i] = g.labels[nodes[i]];
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto [a, b] = g.edges[e];
    if (to_new[a] != -1 && to_new[b] != -1) {
      int x = to_new[a], y = to_new[b];
      if (x > y) std::swap(x, y);
      s.edges.emplace_back(x, y);
      if (g.weighted()) s.edge_weights.push_back(g.edge_weights[e]);
    }
  }
  return out;
}

/// Induced subgraph on all nodes at BFS distance <= l from v.
inline Subgraph k_hop_subgraph(const Graph& g, int v, int l) {
  if (v < 0 || v >= g.n) throw ValidationError("k_hop_subgraph: root out of range");
  if (l < 0) throw ValidationError("k_hop_subgraph: negative hop count");
  auto adj = g.adjacency_lists();
  std::vector<int> dist(g.n, -1);
  std::deque<int> queue{v};
  dist[v] = 0;
  std::vector<int> reached{v};
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dist[u] == l) continue;
    for (auto [w, _] : adj[u]) {
      if (dist[w] == -1) {
        dist[w] = dist[u] + 1;
        reached.push_back(w);
        queue.push_back(w);
      }
    }
  }
  std::sort(reached.begin(), reached.end());
  Subgraph out = induced_subgraph(g, reached);
  out.root = static_cast<int>(std::lower_bound(reached.begin(), reached.end(), v) -
                              reached.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Stochastic block model with class-conditional Gaussian features.
/// Block b's feature mean is `separation` at coordinate (b mod d), 0 elsewhere;
/// unit-variance noise. Labels are block ids.
inline Graph generate_sbm(const std::vector<int>& blocks, double p_in, double p_out, int d,
                          std::uint64_t seed, double separation = 1.0) {
  if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1)
    throw ValidationError("generate_sbm: probabilities must lie in [0,1]");
  if (d <= 0) throw ValidationError("generate_sbm: feature dim must be positive");
  Graph g;
  g.num_classes = static_cast<int>(blocks.size());
  g.n = std::accumulate(blocks.begin(), blocks.end(), 0);
  g.name = "sbm-" + std::to_string(g.n);
  g.labels.resize(g.n);
  int offset = 0;
  for (int b = 0; b < g.num_classes; ++b) {
    std::fill(g.labels.begin() + offset, g.labels.begin() + offset + blocks[b], b);
    offset += blocks[b];
  }
  Rng edge_rng(mix_seed(seed, "sbm-edges"));
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      double p = (g.labels[i] == g.labels[j]) ? p_in : p_out;
      if (p >= 1.0 || (p > 0.0 && edge_rng.bernoulli(p))) g.edges.emplace_back(i, j);
    }
  }
  Rng feat_rng(mix_seed(seed, "sbm-features"));
  g.features.resize(g.n, d);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < d; ++j) g.features(i, j) = feat_rng.normal();
    g.features(i, g.labels[i] % d) += separation;
  }
  return g;
}

}  // namespace gnnsteal
