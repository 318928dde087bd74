#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/gnn.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/oracle.hpp"
#include "gnnsteal/steal.hpp"
#include "gnnsteal/structure.hpp"

namespace gnnsteal {

enum class AttackType { TypeI, TypeII };

inline std::string to_string(AttackType t) { return t == AttackType::TypeI ? "type1" : "type2"; }

inline AttackType attack_type_from_string(const std::string& s) {
  if (s == "type1") return AttackType::TypeI;
  if (s == "type2") return AttackType::TypeII;
  throw ValidationError("unknown attack type '" + s + "'");
}

// ---------------------------------------------------------------------------
// Dataset registry: a dataset axis value is either a bundle directory or an
// inline SBM descriptor "sbm:name=...,blocks=<size>x<count>,pin=..,pout=..,
// dim=..,sep=..,seed=..".
// ---------------------------------------------------------------------------

inline Graph resolve_dataset(const std::string& spec) {
  if (spec.rfind("sbm:", 0) != 0) return load_graph_bundle(spec);
  std::map<std::string, std::string> kv;
  std::stringstream ss(spec.substr(4));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ValidationError("dataset spec '" + spec + "': expected key=value entries");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto get = [&](const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  std::string blocks_str = get("blocks", "");
  auto x = blocks_str.find('x');
  if (blocks_str.empty() || x == std::string::npos)
    throw ValidationError("dataset spec '" + spec + "': blocks=<size>x<count> required");
  int size = std::stoi(blocks_str.substr(0, x));
  int count = std::stoi(blocks_str.substr(x + 1));
  Graph g = generate_sbm(std::vector<int>(count, size), std::stod(get("pin", "0.02")),
                         std::stod(get("pout", "0.002")), std::stoi(get("dim", "64")),
                         std::stoull(get("seed", "42")), std::stod(get("sep", "1.0")));
  g.name = get("name", g.name);
  return g;
}

// ---------------------------------------------------------------------------
// Experiment specification and report
// ---------------------------------------------------------------------------

struct ExperimentSpec {
  std::vector<std::string> datasets;
  std::vector<Arch> target_archs{Arch::GIN};
  std::vector<Arch> surrogate_archs{Arch::GIN};
  std::vector<ResponseKind> response_kinds{ResponseKind::Prediction};
  std::vector<AttackType> attack_types{AttackType::TypeI};
  std::vector<LossKind> loss_kinds{LossKind::Contrastive};
  std::vector<double> budget_fracs{1.0};
  std::vector<double> sigmas{0.0};
  int repetitions = 3;
  std::uint64_t global_seed = 0;
  std::string output_dir;

  int target_epochs = 200;
  int steal_epochs = 200;
  int head_epochs = 300;
  AugmentConfig augment;
  StructureConfig structure;
  TsneOptions tsne;
  bool determinism_audit = false;

  void validate() const {
    if (datasets.empty() || target_archs.empty() || surrogate_archs.empty() ||
        response_kinds.empty() || attack_types.empty() || loss_kinds.empty() ||
        budget_fracs.empty() || sigmas.empty())
      throw ValidationError("experiment spec: no cells (every axis needs at least one value)");
    if (repetitions < 1) throw ValidationError("experiment spec: repetitions must be >= 1");
    for (double f : budget_fracs)
      if (f <= 0.0 || f > 1.0)
        throw ValidationError("experiment spec: budget fractions must lie in (0, 1]");
    for (double s : sigmas)
      if (s < 0.0) throw ValidationError("experiment spec: sigma must be >= 0");
  }
};

struct CellKey {
  std::string dataset;
  Arch target_arch;
  Arch surrogate_arch;
  ResponseKind response_kind;
  AttackType attack_type;
  LossKind loss_kind;
  double budget_frac;
  double sigma;
  int rep;

  std::string axes_string() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g|%.6g|%d", budget_frac, sigma, rep);
    return dataset + "|" + to_string(target_arch) + "|" + to_string(surrogate_arch) + "|" +
           to_string(response_kind) + "|" + to_string(attack_type) + "|" +
           to_string(loss_kind) + "|" + buf;
  }

  /// Shared by every cell attacking the same trained target.
  std::string target_key(std::uint64_t global_seed) const {
    return dataset + "|" + to_string(target_arch) + "|rep" + std::to_string(rep) + "|g" +
           std::to_string(global_seed);
  }
};

struct CellResult {
  CellKey key;
  std::uint64_t seed = 0;  // derived attack seed; pure function of (global seed, axes)
  double accuracy = 0.0, fidelity = 0.0, f1 = 0.0;
  long queries_used = 0;
  double target_accuracy = 0.0;
  bool failed = false;
  std::string error;
};

struct ExperimentReport {
  std::vector<CellResult> rows;
  std::vector<CellResult> audit_rows;  // identical-seed determinism audit
  int computed_cells = 0;
  int loaded_cells = 0;

  struct Aggregate {
    CellKey key;  // rep field unused
    double accuracy_mean = 0, accuracy_std = 0;
    double fidelity_mean = 0, fidelity_std = 0;
    double f1_mean = 0, f1_std = 0;
    double queries_mean = 0, queries_std = 0;
    int runs = 0;
  };

  std::vector<Aggregate> aggregate() const {
    std::map<std::string, std::vector<const CellResult*>> groups;
    std::vector<std::string> order;
    for (const auto& r : rows) {
      if (r.failed) continue;
      CellKey k = r.key;
      k.rep = 0;
      std::string gk = k.axes_string();
      if (!groups.count(gk)) order.push_back(gk);
      groups[gk].push_back(&r);
    }
    std::vector<Aggregate> out;
    for (const auto& gk : order) {
      const auto& rs = groups[gk];
      Aggregate a;
      a.key = rs.front()->key;
      a.key.rep = 0;
      a.runs = static_cast<int>(rs.size());
      auto stats = [&](auto pick, double& mean, double& sd) {
        bool identical = true;
        for (auto* r : rs) identical &= pick(*r) == pick(*rs.front());
        if (identical) {  // keep the identical-seed audit invariant exact
          mean = pick(*rs.front());
          sd = 0.0;
          return;
        }
        double m = 0;
        for (auto* r : rs) m += pick(*r);
        m /= rs.size();
        double v = 0;
        for (auto* r : rs) v += (pick(*r) - m) * (pick(*r) - m);
        mean = m;
        sd = std::sqrt(v / rs.size());
      };
      stats([](const CellResult& r) { return r.accuracy; }, a.accuracy_mean, a.accuracy_std);
      stats([](const CellResult& r) { return r.fidelity; }, a.fidelity_mean, a.fidelity_std);
      stats([](const CellResult& r) { return r.f1; }, a.f1_mean, a.f1_std);
      stats([](const CellResult& r) { return static_cast<double>(r.queries_used); },
            a.queries_mean, a.queries_std);
      out.push_back(a);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Cell execution
// ---------------------------------------------------------------------------

namespace detail {

struct TargetBundle {
  Graph full_graph;
  NodeSplit split;
  Graph train_sub, query_sub, test_sub;
  ModelHandle target;
  double target_test_accuracy = 0.0;
};

inline nlohmann::json cell_to_json(const CellResult& r) {
  return {{"dataset", r.key.dataset},
          {"targetArch", to_string(r.key.target_arch)},
          {"surrogateArch", to_string(r.key.surrogate_arch)},
          {"responseKind", to_string(r.key.response_kind)},
          {"attackType", to_string(r.key.attack_type)},
          {"lossKind", to_string(r.key.loss_kind)},
          {"budgetFrac", r.key.budget_frac},
          {"sigma", r.key.sigma},
          {"rep", r.key.rep},
          {"seed", r.seed},
          {"accuracy", r.accuracy},
          {"fidelity", r.fidelity},
          {"f1", r.f1},
          {"queriesUsed", r.queries_used},
          {"targetAccuracy", r.target_accuracy},
          {"failed", r.failed},
          {"error", r.error}};
}

inline CellResult cell_from_json(const nlohmann::json& j) {
  CellResult r;
  r.key.dataset = j.at("dataset").get<std::string>();
  r.key.target_arch = arch_from_string(j.at("targetArch").get<std::string>());
  r.key.surrogate_arch = arch_from_string(j.at("surrogateArch").get<std::string>());
  r.key.response_kind = response_kind_from_string(j.at("responseKind").get<std::string>());
  r.key.attack_type = attack_type_from_string(j.at("attackType").get<std::string>());
  std::string lk = j.at("lossKind").get<std::string>();
  r.key.loss_kind = lk == "contrastive" ? LossKind::Contrastive
                    : lk == "rmse"      ? LossKind::Rmse
                                        : LossKind::CrossEntropy;
  r.key.budget_frac = j.at("budgetFrac").get<double>();
  r.key.sigma = j.at("sigma").get<double>();
  r.key.rep = j.at("rep").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.fidelity = j.at("fidelity").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.queries_used = j.at("queriesUsed").get<long>();
  r.target_accuracy = j.at("targetAccuracy").get<double>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

/// Atomic write-then-rename so an interrupted run never leaves a torn cell.
inline void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Runs every grid cell with derived per-cell seeds, persisting incrementally
/// (a rerun skips cells whose artifact already exists). Per-cell failures are
/// recorded and the grid continues.
class GridRunner {
 public:
  explicit GridRunner(const ExperimentSpec& spec) : spec_(spec) { spec_.validate(); }

  ExperimentReport run() {
    ExperimentReport report;
    for (const auto& ds : spec_.datasets)
      for (Arch ta : spec_.target_archs)
        for (Arch sa : spec_.surrogate_archs)
          for (ResponseKind rk : spec_.response_kinds)
            for (AttackType at : spec_.attack_types)
              for (LossKind lk : spec_.loss_kinds)
                for (double bf : spec_.budget_fracs)
                  for (double sg : spec_.sigmas)
                    for (int rep = 0; rep < spec_.repetitions; ++rep) {
                      CellKey key{ds, ta, sa, rk, at, lk, bf, sg, rep};
                      report.rows.push_back(run_or_load(key, &report));
                    }
    if (spec_.determinism_audit && !report.rows.empty()) {
      // first cell re-run `repetitions` times with rep 0's seed: std must be 0
      CellKey key = report.rows.front().key;
      key.rep = 0;
      for (int i = 0; i < spec_.repetitions; ++i)
        report.audit_rows.push_back(execute_cell(key));
    }
    return report;
  }

  /// Derived seed for a cell: mix of the global seed and every axis value.
  std::uint64_t cell_seed(const CellKey& key) const {
    return mix_seed(spec_.global_seed, "cell|" + key.axes_string());
  }

  CellResult execute_cell(const CellKey& key) {
    CellResult result;
    result.key = key;
    result.seed = cell_seed(key);
    try {
      run_attack(key, result);
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
    }
    return result;
  }

 private:
  CellResult run_or_load(const CellKey& key, ExperimentReport* report) {
    std::filesystem::path artifact;
    if (!spec_.output_dir.empty()) {
      char hex[32];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv1a(key.axes_string())));
      artifact = std::filesystem::path(spec_.output_dir) / "cells" / (std::string(hex) + ".json");
      if (std::filesystem::exists(artifact)) {
        std::ifstream in(artifact);
        nlohmann::json j;
        try {
          in >> j;
          ++report->loaded_cells;
          return detail::cell_from_json(j);
        } catch (...) {
          // unreadable artifact: recompute below
        }
      }
    }
    CellResult result = execute_cell(key);
    ++report->computed_cells;
    if (!artifact.empty()) detail::write_json_atomic(detail::cell_to_json(result), artifact);
    return result;
  }

  detail::TargetBundle& target_for(const CellKey& key) {
    std::string tk = key.target_key(spec_.global_seed);
    auto it = targets_.find(tk);
    if (it != targets_.end()) return it->second;

    detail::TargetBundle bundle;
    bundle.full_graph = resolve_dataset(key.dataset);
    SplitSpec ss;
    ss.seed = mix_seed(spec_.global_seed, "split|" + tk);
    bundle.split = split_nodes(bundle.full_graph, ss);
    bundle.train_sub = induced_subgraph(bundle.full_graph, bundle.split.target_train).graph;
    bundle.query_sub = induced_subgraph(bundle.full_graph, bundle.split.query).graph;
    bundle.test_sub = induced_subgraph(bundle.full_graph, bundle.split.test).graph;

    ModelConfig mc = target_config(key.target_arch, bundle.full_graph.feature_dim(),
                                   bundle.full_graph.num_classes);
    TrainConfig tc;
    tc.epochs = spec_.target_epochs;
    tc.seed = mix_seed(spec_.global_seed, "target|" + tk);
    std::vector<int> all_train(bundle.train_sub.n);
    std::iota(all_train.begin(), all_train.end(), 0);
    bundle.target = train_target(bundle.train_sub, all_train, mc, tc);

    std::vector<int> all_test(bundle.test_sub.n);
    std::iota(all_test.begin(), all_test.end(), 0);
    auto pred_t = predict(bundle.target, nullptr, bundle.test_sub, all_test,
                          mix_seed(tc.seed, "target-test-eval"));
    bundle.target_test_accuracy = accuracy_score(pred_t, bundle.test_sub.labels);

    return targets_.emplace(tk, std::move(bundle)).first->second;
  }

  void run_attack(const CellKey& key, CellResult& result) {
    if (key.sigma > 0.0 && key.response_kind == ResponseKind::Prediction)
      throw ValidationError("defense applies to embedding/projection responses only");

    detail::TargetBundle& tb = target_for(key);
    result.target_accuracy = tb.target_test_accuracy;

    // budget fraction: seeded subsample of the query split
    Graph query_graph = tb.query_sub;
    if (key.budget_frac < 1.0) {
      std::vector<int> order(tb.query_sub.n);
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(spec_.global_seed, "budget|" + key.axes_string()));
      rng.shuffle(order);
      int keep = static_cast<int>(std::floor(tb.query_sub.n * key.budget_frac + 1e-9));
      if (keep < 10)
        throw ValidationError("skipped: budget fraction yields " + std::to_string(keep) +
                              " < 10 query nodes");
      order.resize(keep);
      std::sort(order.begin(), order.end());
      query_graph = induced_subgraph(tb.query_sub, order).graph;
    }

    std::uint64_t attack_seed = cell_seed(key);
    DefenseConfig defense;
    defense.sigma = key.sigma;
    defense.seed = mix_seed(attack_seed, "defense");
    VictimOracle oracle(tb.target, defense, /*budget=*/-1, spec_.tsne,
                        mix_seed(attack_seed, "oracle"));

    StealConfig sc;
    sc.epochs = spec_.steal_epochs;
    sc.head_epochs = spec_.head_epochs;
    sc.response_kind = key.response_kind;
    sc.surrogate_arch = key.surrogate_arch;
    sc.loss = key.loss_kind;
    sc.augment = spec_.augment;
    sc.seed = attack_seed;

    StealResult sr;
    if (key.attack_type == AttackType::TypeI) {
      sr = steal(oracle, query_graph, sc);
    } else {
      Graph featureless = query_graph;
      featureless.edges.clear();
      featureless.edge_weights.clear();
      StructureConfig st = spec_.structure;
      st.seed = mix_seed(attack_seed, "structure");
      sr = steal_type2(oracle, featureless, st, sc);
    }

    Metrics m = evaluate_surrogate(sr, tb.target, tb.test_sub, mix_seed(attack_seed, "eval"));
    result.accuracy = m.accuracy;
    result.fidelity = m.fidelity;
    result.f1 = m.f1;
    result.queries_used = sr.queries_used;
  }

  ExperimentSpec spec_;
  std::map<std::string, detail::TargetBundle> targets_;
};

inline ExperimentReport run_grid(const ExperimentSpec& spec) {
  GridRunner runner(spec);
  return runner.run();
}

// ---------------------------------------------------------------------------
// Rendering: CSV (round-trippable), Markdown tables, SVG plots
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);  // lossless double round-trip
  return buf;
}

// RFC-4180-style quoting for fields that may contain commas (sbm: specs do)
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "dataset,target_arch,surrogate_arch,response_kind,attack_type,loss_kind,"
         "budget_frac,sigma,seed,accuracy,fidelity,f1,queries_used\n";
  for (const auto& r : report.rows) {
    if (r.failed) continue;
    out << detail::csv_field(r.key.dataset) << ',' << to_string(r.key.target_arch) << ','
        << to_string(r.key.surrogate_arch) << ',' << to_string(r.key.response_kind) << ','
        << to_string(r.key.attack_type) << ',' << to_string(r.key.loss_kind) << ','
        << detail::fmt(r.key.budget_frac) << ',' << detail::fmt(r.key.sigma) << ','
        << r.seed << ',' << detail::fmt(r.accuracy) << ',' << detail::fmt(r.fidelity) << ','
        << detail::fmt(r.f1) << ',' << r.queries_used << "\n";
  }
  return out.str();
}

inline ExperimentReport report_from_csv(std::istream& in) {
  ExperimentReport report;
  std::string line;
  if (!std::getline(in, line)) throw IngestError("report csv: empty input");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols = detail::csv_split(line);
    if (cols.size() != 13)
      throw IngestError("report csv: expected 13 columns, got " + std::to_string(cols.size()));
    CellResult r;
    r.key.dataset = cols[0];
    r.key.target_arch = arch_from_string(cols[1]);
    r.key.surrogate_arch = arch_from_string(cols[2]);
    r.key.response_kind = response_kind_from_string(cols[3]);
    r.key.attack_type = attack_type_from_string(cols[4]);
    r.key.loss_kind = cols[5] == "contrastive" ? LossKind::Contrastive : LossKind::Rmse;
    r.key.budget_frac = std::stod(cols[6]);
    r.key.sigma = std::stod(cols[7]);
    r.seed = std::stoull(cols[8]);
    r.accuracy = std::stod(cols[9]);
    r.fidelity = std::stod(cols[10]);
    r.f1 = std::stod(cols[11]);
    r.queries_used = std::stol(cols[12]);
    report.rows.push_back(r);
  }
  return report;
}

inline std::string aggregate_to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "dataset,target_arch,surrogate_arch,response_kind,attack_type,loss_kind,"
         "budget_frac,sigma,accuracy_mean,accuracy_std,fidelity_mean,fidelity_std,"
         "f1_mean,f1_std,queries_used_mean,queries_used_std\n";
  for (const auto& a : report.aggregate()) {
    out << detail::csv_field(a.key.dataset) << ',' << to_string(a.key.target_arch) << ','
        << to_string(a.key.surrogate_arch) << ',' << to_string(a.key.response_kind) << ','
        << to_string(a.key.attack_type) << ',' << to_string(a.key.loss_kind) << ','
        << detail::fmt(a.key.budget_frac) << ',' << detail::fmt(a.key.sigma) << ','
        << detail::fmt(a.accuracy_mean) << ',' << detail::fmt(a.accuracy_std) << ','
        << detail::fmt(a.fidelity_mean) << ',' << detail::fmt(a.fidelity_std) << ','
        << detail::fmt(a.f1_mean) << ',' << detail::fmt(a.f1_std) << ','
        << detail::fmt(a.queries_mean) << ',' << detail::fmt(a.queries_std) << "\n";
  }
  return out.str();
}

/// Markdown mirroring the paper's layout: one block per dataset, rows =
/// response kind × loss kind, columns = surrogate arch × metric.
inline std::string report_to_markdown(const ExperimentReport& report) {
  auto aggs = report.aggregate();
  if (aggs.empty()) throw ValidationError("render_tables: no cells");
  std::vector<std::string> datasets;
  std::vector<Arch> surrogates;
  for (const auto& a : aggs) {
    if (std::find(datasets.begin(), datasets.end(), a.key.dataset) == datasets.end())
      datasets.push_back(a.key.dataset);
    if (std::find(surrogates.begin(), surrogates.end(), a.key.surrogate_arch) ==
        surrogates.end())
      surrogates.push_back(a.key.surrogate_arch);
  }
  std::ostringstream out;
  char buf[64];
  for (const auto& ds : datasets) {
    out << "## " << ds << "\n\n| task | loss |";
    for (Arch s : surrogates)
      out << " " << to_string(s) << " acc | " << to_string(s) << " fid | " << to_string(s)
          << " f1 |";
    out << "\n|---|---|";
    for (std::size_t i = 0; i < surrogates.size() * 3; ++i) out << "---|";
    out << "\n";
    std::vector<std::string> seen;
    for (const auto& row : aggs) {
      if (row.key.dataset != ds) continue;
      std::string rk = to_string(row.key.response_kind) + "|" + to_string(row.key.loss_kind) +
                       "|" + detail::fmt(row.key.budget_frac) + "|" + detail::fmt(row.key.sigma);
      if (std::find(seen.begin(), seen.end(), rk) != seen.end()) continue;
      seen.push_back(rk);
      out << "| " << to_string(row.key.response_kind) << " | " << to_string(row.key.loss_kind)
          << " |";
      for (Arch s : surrogates) {
        const ExperimentReport::Aggregate* found = nullptr;
        for (const auto& a : aggs)
          if (a.key.dataset == ds && a.key.surrogate_arch == s &&
              a.key.response_kind == row.key.response_kind &&
              a.key.loss_kind == row.key.loss_kind &&
              a.key.budget_frac == row.key.budget_frac && a.key.sigma == row.key.sigma) {
            found = &a;
            break;
          }
        if (!found) {
          out << " - | - | - |";
          continue;
        }
        std::snprintf(buf, sizeof(buf), " %.3f±%.3f |", found->accuracy_mean,
                      found->accuracy_std);
        out << buf;
        std::snprintf(buf, sizeof(buf), " %.3f±%.3f |", found->fidelity_mean,
                      found->fidelity_std);
        out << buf;
        std::snprintf(buf, sizeof(buf), " %.3f±%.3f |", found->f1_mean, found->f1_std);
        out << buf;
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Minimal deterministic SVG line plots
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // x ascending
};

inline std::string render_svg_plot(const std::string& title, const std::string& x_label,
                                   const std::string& y_label,
                                   const std::vector<PlotSeries>& series,
                                   std::optional<double> reference_line = {}) {
  const int w = 640, h = 420, ml = 70, mr = 160, mt = 50, mb = 55;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (reference_line) {
    ymin = std::min(ymin, *reference_line);
    ymax = std::max(ymax, *reference_line);
  }
  if (xmin >= xmax) xmax = xmin + 1;
  if (ymin >= ymax) ymax = ymin + 1;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = xmin + (xmax - xmin) * i / 4.0;
    double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x='" << px(xv) << "' y='" << h - mb + 18
        << "' text-anchor='middle' font-size='11'>" << detail::fmt(std::round(xv * 1000) / 1000)
        << "</text>\n";
    out << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
        << "' text-anchor='end' font-size='11'>" << detail::fmt(std::round(yv * 1000) / 1000)
        << "</text>\n";
  }
  out << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
      << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  out << "<text x='16' y='" << (mt + h - mb) / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << (mt + h - mb) / 2 << ")'>" << y_label << "</text>\n";
  if (reference_line) {
    out << "<line x1='" << ml << "' y1='" << py(*reference_line) << "' x2='" << w - mr
        << "' y2='" << py(*reference_line)
        << "' stroke='gray' stroke-dasharray='6,4'/>\n";
    out << "<text x='" << w - mr + 6 << "' y='" << py(*reference_line) + 4
        << "' font-size='11' fill='gray'>baseline</text>\n";
  }
  int ci = 0;
  for (const auto& s : series) {
    const char* color = colors[ci % 6];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (auto [x, y] : s.points) out << px(x) << "," << py(y) << " ";
    out << "'/>\n";
    for (auto [x, y] : s.points)
      out << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << color
          << "'/>\n";
    out << "<text x='" << w - mr + 6 << "' y='" << mt + 16 * ci + 12 << "' font-size='11' fill='"
        << color << "'>" << s.label << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
  return out.str();
}

/// Writes runs.csv, aggregate.csv, tables.md (and audit.csv when present).
inline void render_tables(const ExperimentReport& report, const std::filesystem::path& dir) {
  if (report.rows.empty()) throw ValidationError("render_tables: no cells");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "runs.csv");
    out << report_to_csv(report);
  }
  {
    std::ofstream out(dir / "aggregate.csv");
    out << aggregate_to_csv(report);
  }
  {
    std::ofstream out(dir / "tables.md");
    out << report_to_markdown(report);
  }
  if (!report.audit_rows.empty()) {
    ExperimentReport audit;
    audit.rows = report.audit_rows;
    std::ofstream out(dir / "audit.csv");
    out << report_to_csv(audit);
  }
}

/// One SVG per (metric, sweep axis) pair present in the report.
inline std::vector<std::filesystem::path> render_plots(const ExperimentReport& report,
                                                       const std::filesystem::path& dir,
                                                       std::optional<double> budget_reference = {}) {
  if (report.rows.empty()) throw ValidationError("render_plots: no cells");
  std::filesystem::create_directories(dir);
  auto aggs = report.aggregate();
  std::vector<std::filesystem::path> written;

  auto sweep_plot = [&](const std::string& sweep, auto x_of, const std::string& x_label) {
    std::vector<double> xs;
    for (const auto& a : aggs)
      if (std::find(xs.begin(), xs.end(), x_of(a.key)) == xs.end()) xs.push_back(x_of(a.key));
    if (xs.size() < 2) return;  // nothing swept on this axis
    std::sort(xs.begin(), xs.end());
    struct MetricDef {
      const char* name;
      double ExperimentReport::Aggregate::* mean;
    };
    const MetricDef metrics[] = {{"accuracy", &ExperimentReport::Aggregate::accuracy_mean},
                                 {"fidelity", &ExperimentReport::Aggregate::fidelity_mean},
                                 {"f1", &ExperimentReport::Aggregate::f1_mean}};
    for (const auto& metric : metrics) {
      std::map<std::string, PlotSeries> series;
      for (const auto& a : aggs) {
        std::string label = to_string(a.key.surrogate_arch) + "/" + to_string(a.key.loss_kind);
        series[label].label = label;
        series[label].points.emplace_back(x_of(a.key), a.*(metric.mean));
      }
      std::vector<PlotSeries> list;
      for (auto& [_, s] : series) {
        std::sort(s.points.begin(), s.points.end());
        list.push_back(s);
      }
      auto path = dir / (sweep + "_" + metric.name + ".svg");
      std::ofstream out(path);
      out << render_svg_plot(std::string(metric.name) + " vs " + x_label, x_label,
                             metric.name, list,
                             sweep == "budget" ? budget_reference : std::nullopt);
      written.push_back(path);
    }
  };
  sweep_plot("budget", [](const CellKey& k) { return k.budget_frac; }, "query budget fraction");
  sweep_plot("defense", [](const CellKey& k) { return k.sigma; }, "defense sigma");
  return written;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepResult {
  ExperimentReport report;
  std::vector<std::filesystem::path> plots;
};

/// Query-budget sweep: runs the grid over the given fractions of the query
/// split; plots carry a horizontal reference at the RMSE baseline's
/// full-query-split (30% of nodes) fidelity when that cell is present.
inline SweepResult budget_sweep(ExperimentSpec spec, const std::vector<double>& fractions) {
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0)
      throw ValidationError("budget_sweep: fractions must lie in (0, 1]");
  spec.budget_fracs = fractions;
  if (std::find(spec.loss_kinds.begin(), spec.loss_kinds.end(), LossKind::Rmse) ==
      spec.loss_kinds.end())
    spec.loss_kinds.push_back(LossKind::Rmse);  // baseline for the reference line
  if (std::find(spec.budget_fracs.begin(), spec.budget_fracs.end(), 1.0) ==
      spec.budget_fracs.end())
    spec.budget_fracs.push_back(1.0);
  SweepResult result;
  result.report = run_grid(spec);
  std::optional<double> reference;
  for (const auto& a : result.report.aggregate())
    if (a.key.loss_kind == LossKind::Rmse && a.key.budget_frac == 1.0) {
      reference = a.fidelity_mean;
      break;
    }
  if (!spec.output_dir.empty())
    result.plots = render_plots(result.report, std::filesystem::path(spec.output_dir) / "plots",
                                reference);
  return result;
}

/// Gaussian-defense sweep over σ values (embedding/projection responses).
inline SweepResult defense_sweep(ExperimentSpec spec, const std::vector<double>& sigmas) {
  if (sigmas.empty()) throw ValidationError("defense_sweep: no sigma values");
  for (ResponseKind k : spec.response_kinds)
    if (k == ResponseKind::Prediction)
      throw ValidationError("defense_sweep: response kind must be embedding or projection");
  spec.sigmas = sigmas;
  SweepResult result;
  result.report = run_grid(spec);
  if (!spec.output_dir.empty())
    result.plots = render_plots(result.report, std::filesystem::path(spec.output_dir) / "plots");
  return result;
}

/// Desk-scale default grid: Citeseer bundle (if ingested) + a synthetic SBM
/// proxy, GIN target, all surrogate archs, all response kinds, both attack
/// types, both loss kinds.
inline ExperimentSpec default_experiment_spec() {
  ExperimentSpec spec;
  spec.datasets = {"data/citeseer",
                   "sbm:name=sbm1500,blocks=500x3,pin=0.02,pout=0.002,dim=100,sep=1.2,seed=42"};
  spec.target_archs = {Arch::GIN};
  spec.surrogate_archs = {Arch::GIN, Arch::GAT, Arch::SAGE};
  spec.response_kinds = {ResponseKind::Prediction, ResponseKind::Embedding,
                         ResponseKind::Projection};
  spec.attack_types = {AttackType::TypeI, AttackType::TypeII};
  spec.loss_kinds = {LossKind::Contrastive, LossKind::Rmse};
  spec.repetitions = 3;
  spec.determinism_audit = true;
  return spec;
}

}  // namespace gnnsteal
