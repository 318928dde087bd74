#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gnnsteal/graph.hpp"

using namespace gnnsteal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// end-to-end exercises of the built binary; GNNSTEAL_CLI_PATH comes from CMake
const char* cli = GNNSTEAL_CLI_PATH;

int run(const std::string& args, const fs::path& cwd) {
  std::string cmd = "cd " + cwd.string() + " && " + std::string(cli) + " " + args +
                    " >> cli_stdout.log 2>> cli_stderr.log";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path workspace(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("gnnsteal_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_config(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

json tiny_config() {
  return {{"dataset", {{"spec", "sbm:name=toy,blocks=25x2,pin=0.3,pout=0.04,dim=6,sep=2.5,seed=3"}}},
          {"target", {{"arch", "gin"}, {"epochs", 20}, {"modelDir", "out/target"}}},
          {"attack",
           {{"surrogateArch", "gin"},
            {"responseKind", "prediction"},
            {"loss", "rmse"},
            {"epochs", 10},
            {"headEpochs", 60},
            {"structure", {{"k", 4}}}}},
          {"output", {{"dir", "out"}}},
          {"seed", 11}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cli version flag works", "[cli]") {
  auto ws = workspace("version");
  CHECK(run("--version", ws) == 0);
}

TEST_CASE("train-target twice produces identical model files", "[cli]") {
  auto ws = workspace("determinism");
  write_config(ws / "c.json", tiny_config());
  REQUIRE(run("train-target --config c.json --out run1", ws) == 0);
  REQUIRE(run("train-target --config c.json --out run2", ws) == 0);
  CHECK(slurp(ws / "run1/target/weights.bin") == slurp(ws / "run2/target/weights.bin"));
  CHECK(!slurp(ws / "run1/target/weights.bin").empty());
}

TEST_CASE("attack without a trained target exits with a validation error", "[cli]") {
  auto ws = workspace("noturl");
  write_config(ws / "c.json", tiny_config());
  CHECK(run("attack --config c.json", ws) == 1);
}

TEST_CASE("invalid config exits 1 and lists violations", "[cli]") {
  auto ws = workspace("badcfg");
  json bad = tiny_config();
  bad["surprise"] = 1;
  bad["target"]["epochs"] = "many";
  write_config(ws / "c.json", bad);
  CHECK(run("train-target --config c.json", ws) == 1);
  std::string err = slurp(ws / "cli_stderr.log");
  CHECK(err.find("unknown key 'surprise'") != std::string::npos);
  CHECK(err.find("$.target.epochs") != std::string::npos);
}

TEST_CASE("dry run validates and plans without side effects", "[cli]") {
  auto ws = workspace("dryrun");
  write_config(ws / "c.json", tiny_config());
  REQUIRE(run("train-target --config c.json --dry-run", ws) == 0);
  CHECK_FALSE(fs::exists(ws / "out"));
  std::string plan = slurp(ws / "cli_stdout.log");
  CHECK(plan.find("train-target") != std::string::npos);
}

TEST_CASE("full pipeline: train, attack, typeii, report", "[cli]") {
  auto ws = workspace("pipeline");
  write_config(ws / "c.json", tiny_config());
  REQUIRE(run("train-target --config c.json", ws) == 0);
  CHECK(fs::exists(ws / "out/target/weights.bin"));
  CHECK(fs::exists(ws / "out/target/split.json"));

  REQUIRE(run("attack --config c.json", ws) == 0);
  CHECK(fs::exists(ws / "out/surrogate/steal_meta.json"));
  CHECK(fs::exists(ws / "out/oracle_audit.jsonl"));
  {
    std::ifstream in(ws / "out/surrogate/metrics.json");
    json m;
    in >> m;
    CHECK(m["queriesUsed"].get<long>() == 15);  // floor(50 * 0.3)
    CHECK(m["accuracy"].get<double>() >= 0.0);
  }

  REQUIRE(run("attack-typeii --config c.json", ws) == 0);
  CHECK(fs::exists(ws / "out/surrogate_typeii/metrics.json"));
  CHECK(fs::exists(ws / "out/surrogate_typeii/learned_edges.tsv"));
}

TEST_CASE("sweep-budget writes report artifacts and report renders csv", "[cli]") {
  auto ws = workspace("sweep");
  json cfg = tiny_config();
  cfg["sweep"] = {{"budgetFractions", {0.8, 1.0}}, {"repetitions", 1}};
  cfg["attack"]["epochs"] = 5;
  cfg["target"]["epochs"] = 12;
  write_config(ws / "c.json", cfg);
  REQUIRE(run("sweep-budget --config c.json", ws) == 0);
  CHECK(fs::exists(ws / "out/report/runs.csv"));
  CHECK(fs::exists(ws / "out/report/aggregate.csv"));
  CHECK(fs::exists(ws / "out/cells"));

  REQUIRE(run("report --in out --format csv --out rendered.csv", ws) == 0);
  std::string csv = slurp(ws / "rendered.csv");
  CHECK(csv.rfind("dataset,target_arch", 0) == 0);
  REQUIRE(run("report --in out --format md --out rendered.md", ws) == 0);
  CHECK(slurp(ws / "rendered.md").find("| task |") != std::string::npos);
}

TEST_CASE("ingest converts raw TSVs into a loadable bundle", "[cli]") {
  auto ws = workspace("ingest");
  {
    std::ofstream f(ws / "feat.tsv");
    f << "1\t0\n0\t1\n1\t1\n";
    std::ofstream l(ws / "lab.tsv");
    l << "0\n1\n0\n";
    std::ofstream e(ws / "edg.tsv");
    e << "0\t1\n1\t0\n1\t2\n";
  }
  REQUIRE(run("ingest --edges edg.tsv --features feat.tsv --labels lab.tsv "
              "--name mini --out bundle", ws) == 0);
  Graph g = load_graph_bundle(ws / "bundle");
  CHECK(g.n == 3);
  CHECK(g.edges.size() == 2);  // deduplicated
  CHECK(g.num_classes == 2);
  CHECK(g.name == "mini");
}
