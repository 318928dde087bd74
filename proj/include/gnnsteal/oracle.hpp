#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/gnn.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/nn.hpp"
#include "gnnsteal/tsne.hpp"

namespace gnnsteal {

/// The three response formats of the query API: posterior matrix Θ,
/// penultimate-layer embedding matrix H, or the 2-D t-SNE projection Υ of H.
enum class ResponseKind { Prediction, Embedding, Projection };

inline std::string to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::Prediction: return "prediction";
    case ResponseKind::Embedding: return "embedding";
    default: return "projection";
  }
}

inline ResponseKind response_kind_from_string(const std::string& s) {
  if (s == "prediction") return ResponseKind::Prediction;
  if (s == "embedding") return ResponseKind::Embedding;
  if (s == "projection") return ResponseKind::Projection;
  throw ValidationError("unknown response kind '" + s + "'");
}

struct QueryLedger {
  long total_node_queries = 0;
  std::map<int, long> per_node_counts;
  long budget = -1;  // -1 = unlimited

  long remaining() const { return budget < 0 ? -1 : budget - total_node_queries; }
};

/// Gaussian-noise defense; applies to embedding and projection responses.
/// Predictions are never noised unless noise_predictions is set (documented
/// extension hook, off by default).
struct DefenseConfig {
  double sigma = 0.0;
  bool noise_predictions = false;
  std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, σ²) per entry; σ=0 is the identity.
inline Eigen::MatrixXd apply_defense(const Eigen::MatrixXd& response,
                                     const DefenseConfig& cfg) {
  if (cfg.sigma == 0.0) return response;
  Eigen::MatrixXd out = response;
  Rng rng(mix_seed(cfg.seed, "gaussian-defense"));
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += rng.normal(0.0, cfg.sigma);
  return out;
}

/// Black-box wrapper around a trained target. Exposes only answer_query and
/// ledger inspection; parameters, gradients, and architecture stay hidden.
/// Internally each queried node is evaluated on its l-hop subgraph of the
/// submitted graph (l = target depth); the layer-wise forward is exactly
/// equivalent and shares work across nodes.
///
/// Projection responses are t-SNE frames of the current batch only: two
/// disjoint batches use inconsistent frames, mirroring a real visualization
/// API. Single-writer contract: answer_query must be externally serialized.
class VictimOracle {
 public:
  VictimOracle(ModelHandle target, DefenseConfig defense = {}, long budget = -1,
               TsneOptions tsne = {}, std::uint64_t seed = 0)
      : target_(std::move(target)), defense_(defense), tsne_(tsne), seed_(seed) {
    if (target_.config.role != RoleKind::Target)
      throw ValidationError("oracle: wrapped model must have the target role");
    ledger_.budget = budget;
  }

  const QueryLedger& ledger() const { return ledger_; }

  void enable_audit_log(const std::filesystem::path& path) {
    audit_.emplace(path, std::ios::app);
    if (!*audit_) throw IngestError("oracle: cannot open audit log " + path.string());
  }

  Eigen::MatrixXd answer_query(const Graph& graph, const std::vector<int>& nodes,
                               ResponseKind kind) {
    if (nodes.empty()) throw ValidationError("answer_query: empty node list");
    if (ledger_.budget >= 0 &&
        ledger_.total_node_queries + static_cast<long>(nodes.size()) > ledger_.budget)
      throw BudgetError("answer_query: budget exhausted (" +
                        std::to_string(ledger_.total_node_queries) + " used of " +
                        std::to_string(ledger_.budget) + ", batch of " +
                        std::to_string(nodes.size()) + " requested)");

    const std::uint64_t batch_seed = mix_seed(seed_, "oracle-batch", batch_counter_);
    Eigen::MatrixXd response;
    bool noisable = true;
    switch (kind) {
      case ResponseKind::Prediction:
        response = softmax_rows(forward_outputs(target_, graph, nodes, batch_seed));
        noisable = defense_.noise_predictions;
        break;
      case ResponseKind::Embedding:
        response = forward_embeddings(target_, graph, nodes, batch_seed);
        break;
      case ResponseKind::Projection: {
        Eigen::MatrixXd h = forward_embeddings(target_, graph, nodes, batch_seed);
        TsneOptions o = tsne_;
        o.seed = mix_seed(batch_seed, "tsne");
        response = tsne_project(h, o).embedding;
        break;
      }
    }
    if (noisable && defense_.sigma > 0.0) {
      DefenseConfig d = defense_;
      d.seed = mix_seed(defense_.seed, "batch", batch_counter_);
      response = apply_defense(response, d);
    }

    ledger_.total_node_queries += static_cast<long>(nodes.size());
    for (int v : nodes) ++ledger_.per_node_counts[v];
    if (audit_) {
      nlohmann::json rec = {
          {"timestamp", std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count()},
          {"kind", to_string(kind)},
          {"nodeCount", nodes.size()},
          {"sigma", defense_.sigma},
          {"runningTotal", ledger_.total_node_queries}};
      *audit_ << rec.dump() << "\n";
      audit_->flush();
    }
    ++batch_counter_;
    return response;
  }

 private:
  ModelHandle target_;
  DefenseConfig defense_;
  TsneOptions tsne_;
  std::uint64_t seed_;
  QueryLedger ledger_;
  long batch_counter_ = 0;
  std::optional<std::ofstream> audit_;
};

}  // namespace gnnsteal
