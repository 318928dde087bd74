// gnnsteal CLI: dataset ingestion, target training, model-stealing attacks,
// budget/defense sweeps, and report rendering. Stages communicate only
// through serialized artifacts on disk; all randomness hangs off --seed.
//
// Exit codes: 0 success, 1 validation/config error, 2 runtime failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gnnsteal/config.hpp"
#include "gnnsteal/gnn.hpp"
#include "gnnsteal/graph.hpp"
#include "gnnsteal/harness.hpp"
#include "gnnsteal/oracle.hpp"
#include "gnnsteal/steal.hpp"
#include "gnnsteal/structure.hpp"
#include "gnnsteal/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gnnsteal;

namespace {

void log_line(const std::string& msg) { std::cerr << "[gnnsteal] " << msg << "\n"; }

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "JSON run configuration");
  if (needs_config) c->required();
  cmd->add_option("--seed", opts.seed, "overrides config seed");
  cmd->add_option("--out", opts.out_dir, "overrides config output.dir");
  cmd->add_flag("--dry-run", opts.dry_run, "validate config and print the plan; no side effects");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;          // flags override config scalars
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  return cfg;
}

json plan_json(const std::string& stage, const RunConfig& cfg) {
  return {{"stage", stage},
          {"dataset", cfg.dataset_spec},
          {"seed", cfg.seed},
          {"outputDir", cfg.output_dir},
          {"targetArch", to_string(cfg.target_arch)},
          {"surrogateArch", to_string(cfg.surrogate_arch)},
          {"responseKind", to_string(cfg.response_kind)},
          {"loss", to_string(cfg.loss_kind)}};
}

void save_split(const NodeSplit& split, const std::string& dataset, std::uint64_t seed,
                const fs::path& path) {
  json j = {{"dataset", dataset},
            {"seed", seed},
            {"targetTrain", split.target_train},
            {"query", split.query},
            {"test", split.test}};
  std::ofstream out(path);
  out << j.dump() << "\n";
}

NodeSplit load_split(const fs::path& path, std::string* dataset = nullptr) {
  std::ifstream in(path);
  if (!in) throw IngestError("missing split file: " + path.string());
  json j;
  in >> j;
  NodeSplit s;
  s.target_train = j.at("targetTrain").get<std::vector<int>>();
  s.query = j.at("query").get<std::vector<int>>();
  s.test = j.at("test").get<std::vector<int>>();
  if (dataset) *dataset = j.at("dataset").get<std::string>();
  return s;
}

int cmd_ingest(const std::string& edges, const std::string& features, const std::string& labels,
               const std::string& name, int num_classes, const std::string& out_dir) {
  // read raw TSVs leniently, then emit a validated canonical bundle
  Graph g;
  g.name = name;
  {
    std::ifstream in(features);
    if (!in) throw IngestError("ingest: cannot open features file " + features);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<double> row;
      double v;
      while (ss >> v) row.push_back(v);
      if (!rows.empty() && row.size() != rows.front().size())
        throw IngestError("ingest: ragged feature row " + std::to_string(rows.size() + 1));
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestError("ingest: empty features file");
    g.n = static_cast<int>(rows.size());
    g.features.resize(g.n, rows.front().size());
    for (int i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) g.features(i, j) = rows[i][j];
  }
  {
    std::ifstream in(labels);
    if (!in) throw IngestError("ingest: cannot open labels file " + labels);
    int c;
    while (in >> c) g.labels.push_back(c);
    if (static_cast<int>(g.labels.size()) != g.n)
      throw IngestError("ingest: " + std::to_string(g.labels.size()) + " labels for " +
                        std::to_string(g.n) + " feature rows");
  }
  g.num_classes = num_classes > 0
                      ? num_classes
                      : *std::max_element(g.labels.begin(), g.labels.end()) + 1;
  {
    std::ifstream in(edges);
    if (!in) throw IngestError("ingest: cannot open edges file " + edges);
    std::string line;
    std::vector<std::pair<int, int>> raw;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long a, b;
      if (!(ss >> a >> b))
        throw IngestError("ingest: edges line " + std::to_string(lineno) +
                          ": expected two integers");
      if (a < 0 || a >= g.n || b < 0 || b >= g.n)
        throw ValidationError("ingest: edges line " + std::to_string(lineno) +
                              ": index out of range [0, " + std::to_string(g.n) + ")");
      raw.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
    g.edges = dedup_edges(std::move(raw));
  }
  validate_graph(g);
  save_graph_bundle(g, out_dir);
  log_line("ingested '" + name + "': n=" + std::to_string(g.n) +
           " d=" + std::to_string(g.feature_dim()) +
           " classes=" + std::to_string(g.num_classes) +
           " edges=" + std::to_string(g.edges.size()) + " -> " + out_dir);
  return 0;
}

int cmd_train_target(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cfg.dataset_spec.empty()) throw ConfigError("train-target: dataset.path or dataset.spec required");
  if (opts.dry_run) {
    std::cout << plan_json("train-target", cfg).dump(2) << "\n";
    return 0;
  }
  Graph g = resolve_dataset(cfg.dataset_spec);
  SplitSpec ss;
  ss.seed = cfg.seed;
  NodeSplit split = split_nodes(g, ss);
  Graph train_sub = induced_subgraph(g, split.target_train).graph;
  ModelConfig mc = target_config(cfg.target_arch, g.feature_dim(), g.num_classes);
  TrainConfig tc;
  tc.epochs = cfg.target_epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = mix_seed(cfg.seed, "cli-target");
  std::vector<int> all(train_sub.n);
  std::iota(all.begin(), all.end(), 0);
  log_line("training " + to_string(cfg.target_arch) + " target on " + g.name + " (" +
           std::to_string(train_sub.n) + " nodes, " + std::to_string(tc.epochs) + " epochs)");
  ModelHandle target = train_target(train_sub, all, mc, tc);

  Graph test_sub = induced_subgraph(g, split.test).graph;
  std::vector<int> all_test(test_sub.n);
  std::iota(all_test.begin(), all_test.end(), 0);
  auto preds = predict(target, nullptr, test_sub, all_test, mix_seed(tc.seed, "test-eval"));
  double acc = accuracy_score(preds, test_sub.labels);
  double f1 = macro_f1(preds, test_sub.labels, g.num_classes);

  fs::path dir = fs::path(cfg.output_dir) / "target";
  save_model(target, dir);
  save_split(split, cfg.dataset_spec, cfg.seed, dir / "split.json");
  {
    json metrics = {{"testAccuracy", acc}, {"testF1", f1}, {"dataset", g.name}};
    std::ofstream out(dir / "metrics.json");
    out << metrics.dump(2) << "\n";
  }
  log_line("target test accuracy " + std::to_string(acc) + ", macro-F1 " + std::to_string(f1));
  std::cout << json({{"targetDir", dir.string()}, {"testAccuracy", acc}, {"testF1", f1}}).dump(2)
            << "\n";
  return 0;
}

int run_attack_command(const CommonOpts& opts, const std::string& target_dir_flag,
                       AttackType type) {
  RunConfig cfg = resolve_config(opts);
  std::string target_dir = !target_dir_flag.empty() ? target_dir_flag : cfg.target_model_dir;
  if (target_dir.empty())
    throw ConfigError("attack: trained target path required (target.modelDir or --target)");
  if (opts.dry_run) {
    json plan = plan_json(type == AttackType::TypeI ? "attack" : "attack-typeii", cfg);
    plan["targetDir"] = target_dir;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  if (!fs::exists(fs::path(target_dir) / "config.json"))
    throw ConfigError("attack: no trained target at " + target_dir);

  ModelHandle target = load_model(target_dir);
  std::string split_dataset;
  NodeSplit split = load_split(fs::path(target_dir) / "split.json", &split_dataset);
  std::string dataset_spec = cfg.dataset_spec.empty() ? split_dataset : cfg.dataset_spec;
  Graph g = resolve_dataset(dataset_spec);
  Graph query_sub = induced_subgraph(g, split.query).graph;
  Graph test_sub = induced_subgraph(g, split.test).graph;

  DefenseConfig defense;
  defense.sigma = cfg.defense_sigma;
  defense.noise_predictions = cfg.defense_noise_predictions;
  defense.seed = mix_seed(cfg.seed, "cli-defense");
  VictimOracle oracle(target, defense, -1, {}, mix_seed(cfg.seed, "cli-oracle"));
  fs::path out_root(cfg.output_dir);
  fs::create_directories(out_root);
  oracle.enable_audit_log(out_root / "oracle_audit.jsonl");

  StealConfig sc;
  sc.tau = cfg.tau;
  sc.epochs = cfg.attack_epochs;
  sc.head_epochs = cfg.head_epochs;
  sc.response_kind = cfg.response_kind;
  sc.surrogate_arch = cfg.surrogate_arch;
  sc.loss = cfg.loss_kind;
  sc.augment = cfg.augment;
  sc.seed = mix_seed(cfg.seed, "cli-attack");

  log_line(std::string(type == AttackType::TypeI ? "Type I" : "Type II") + " attack: " +
           to_string(cfg.surrogate_arch) + " surrogate, " + to_string(cfg.response_kind) +
           " response, " + to_string(cfg.loss_kind) + " loss, " +
           std::to_string(query_sub.n) + " query nodes");
  StealResult sr;
  Eigen::MatrixXd learned_structure;
  if (type == AttackType::TypeI) {
    sr = steal(oracle, query_sub, sc);
  } else {
    Graph featureless = query_sub;
    featureless.edges.clear();
    featureless.edge_weights.clear();
    StructureConfig st = cfg.structure;
    st.seed = mix_seed(cfg.seed, "cli-structure");
    sr = steal_type2(oracle, featureless, st, sc, &learned_structure);
  }
  Metrics m = evaluate_surrogate(sr, target, test_sub, mix_seed(cfg.seed, "cli-eval"));

  fs::path dir = out_root / (type == AttackType::TypeI ? "surrogate" : "surrogate_typeii");
  save_steal_result(sr, dir);
  if (learned_structure.size() > 0)
    save_weighted_edges(learned_structure, dir / "learned_edges.tsv");
  json metrics = {{"accuracy", m.accuracy},
                  {"fidelity", m.fidelity},
                  {"f1", m.f1},
                  {"queriesUsed", sr.queries_used},
                  {"ledgerTotal", oracle.ledger().total_node_queries}};
  {
    std::ofstream out(dir / "metrics.json");
    out << metrics.dump(2) << "\n";
  }
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

ExperimentSpec sweep_spec_from_config(const RunConfig& cfg) {
  ExperimentSpec spec;
  spec.datasets = {cfg.dataset_spec};
  spec.target_archs = {cfg.target_arch};
  spec.surrogate_archs = cfg.sweep_surrogate_archs.empty()
                             ? std::vector<Arch>{cfg.surrogate_arch}
                             : cfg.sweep_surrogate_archs;
  spec.response_kinds = cfg.sweep_response_kinds.empty()
                            ? std::vector<ResponseKind>{cfg.response_kind}
                            : cfg.sweep_response_kinds;
  spec.loss_kinds = cfg.sweep_loss_kinds.empty() ? std::vector<LossKind>{cfg.loss_kind}
                                                 : cfg.sweep_loss_kinds;
  spec.attack_types = cfg.sweep_attack_types.empty()
                          ? std::vector<AttackType>{AttackType::TypeI}
                          : cfg.sweep_attack_types;
  spec.repetitions = cfg.repetitions;
  spec.global_seed = cfg.seed;
  spec.output_dir = cfg.output_dir;
  spec.target_epochs = cfg.target_epochs;
  spec.steal_epochs = cfg.attack_epochs;
  spec.head_epochs = cfg.head_epochs;
  spec.augment = cfg.augment;
  spec.structure = cfg.structure;
  return spec;
}

int cmd_sweep_budget(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cfg.sweep_budget_fractions.empty())
    throw ConfigError("sweep-budget: sweep.budgetFractions required");
  if (opts.dry_run) {
    json plan = plan_json("sweep-budget", cfg);
    plan["fractions"] = cfg.sweep_budget_fractions;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  ExperimentSpec spec = sweep_spec_from_config(cfg);
  log_line("budget sweep over " + std::to_string(cfg.sweep_budget_fractions.size()) +
           " fractions");
  SweepResult res = budget_sweep(spec, cfg.sweep_budget_fractions);
  render_tables(res.report, fs::path(cfg.output_dir) / "report");
  std::cout << aggregate_to_csv(res.report);
  return 0;
}

int cmd_sweep_defense(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cfg.sweep_sigmas.empty()) throw ConfigError("sweep-defense: sweep.sigmas required");
  if (opts.dry_run) {
    json plan = plan_json("sweep-defense", cfg);
    plan["sigmas"] = cfg.sweep_sigmas;
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  ExperimentSpec spec = sweep_spec_from_config(cfg);
  if (spec.response_kinds == std::vector<ResponseKind>{ResponseKind::Prediction})
    spec.response_kinds = {ResponseKind::Embedding};
  log_line("defense sweep over " + std::to_string(cfg.sweep_sigmas.size()) + " sigmas");
  SweepResult res = defense_sweep(spec, cfg.sweep_sigmas);
  render_tables(res.report, fs::path(cfg.output_dir) / "report");
  std::cout << aggregate_to_csv(res.report);
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format, const std::string& out) {
  ExperimentReport report;
  fs::path cells = fs::path(in_dir) / "cells";
  if (!fs::exists(cells)) throw IngestError("report: no cells directory under " + in_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cells))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    in >> j;
    report.rows.push_back(detail::cell_from_json(j));
  }
  if (report.rows.empty()) throw IngestError("report: no cell artifacts in " + cells.string());
  std::string rendered = format == "md" ? report_to_markdown(report) : report_to_csv(report);
  if (out.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream o(out);
    o << rendered;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model-stealing experiment framework for inductive GNNs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert raw TSV data into a graph bundle");
  std::string in_edges, in_features, in_labels, in_name = "dataset", in_out = "data/bundle";
  int in_classes = 0;
  ingest->add_option("--edges", in_edges, "edge list TSV (src <tab> dst)")->required();
  ingest->add_option("--features", in_features, "feature matrix TSV")->required();
  ingest->add_option("--labels", in_labels, "label file (one integer per line)")->required();
  ingest->add_option("--name", in_name, "dataset name");
  ingest->add_option("--num-classes", in_classes, "class count (default: max label + 1)");
  ingest->add_option("--out", in_out, "bundle output directory");

  CommonOpts train_opts, attack_opts, attack2_opts, budget_opts, defense_opts;
  auto* train = app.add_subcommand("train-target", "train a victim GNN on the 20% split");
  add_common(train, train_opts);

  auto* attack = app.add_subcommand("attack", "Type I stealing attack (structure known)");
  add_common(attack, attack_opts);
  std::string attack_target, attack2_target;
  attack->add_option("--target", attack_target, "trained target directory");

  auto* attack2 =
      app.add_subcommand("attack-typeii", "Type II attack (structure learned from features)");
  add_common(attack2, attack2_opts);
  attack2->add_option("--target", attack2_target, "trained target directory");

  auto* sweep_b = app.add_subcommand("sweep-budget", "attack under varying query budgets");
  add_common(sweep_b, budget_opts);
  auto* sweep_d = app.add_subcommand("sweep-defense", "attack against Gaussian-noise defense");
  add_common(sweep_d, defense_opts);

  auto* report = app.add_subcommand("report", "render experiment cells as CSV or Markdown");
  std::string rep_in, rep_format = "csv", rep_out;
  report->add_option("--in", rep_in, "experiment output directory")->required();
  report->add_option("--format", rep_format, "csv|md")->check(CLI::IsMember({"csv", "md"}));
  report->add_option("--out", rep_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed())
      return cmd_ingest(in_edges, in_features, in_labels, in_name, in_classes, in_out);
    if (train->parsed()) return cmd_train_target(train_opts);
    if (attack->parsed()) return run_attack_command(attack_opts, attack_target, AttackType::TypeI);
    if (attack2->parsed())
      return run_attack_command(attack2_opts, attack2_target, AttackType::TypeII);
    if (sweep_b->parsed()) return cmd_sweep_budget(budget_opts);
    if (sweep_d->parsed()) return cmd_sweep_defense(defense_opts);
    if (report->parsed()) return cmd_report(rep_in, rep_format, rep_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
