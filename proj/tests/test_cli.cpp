// Drives the installed command-line binary end to end through std::system.

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "granger/csv.hpp"

namespace fs = std::filesystem;

namespace {

// Stale artifacts from an older binary must not leak into this run.
const bool wiped = [] {
  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / "granger_cli_tests", ec);
  return true;
}();

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "granger_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  static int counter = 0;
  auto log = work_dir() / ("log" + std::to_string(counter++) + ".txt");
  std::string cmd = std::string(GRANGER_CLI_PATH) + " " + args + " > " +
                    log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_config(const fs::path& path) {
  std::ofstream out(path);
  out << "[model]\n"
         "lag = 1\n"
         "d_model = 8\n"
         "n_layers = 1\n"
         "n_heads = 2\n"
         "\n"
         "[optimizer]\n"
         "learning_rate = 0.01\n"
         "batch_size = 16\n"
         "epochs = 2\n"
         "lambda = 0.01\n"
         "seed = 3\n";
}

// One shared dataset plus one finished training run for the later cases.
struct Fixture {
  fs::path root = work_dir();
  fs::path data, truth, config, run;

  Fixture() {
    data = root / "ds" / "data.csv";
    truth = root / "ds" / "truth.csv";
    config = root / "cfg.toml";
    run = root / "run";
    if (fs::exists(run / "adjacency.csv")) return;
    REQUIRE(run_cli("generate var --n 4 --t 150 --order 1 --seed 5 --out " +
                    (root / "ds").string()) == 0);
    write_config(config);
    REQUIRE(run_cli("train --config " + config.string() + " --data " +
                    data.string() + " --truth " + truth.string() +
                    " --out " + run.string()) == 0);
  }
};

}  // namespace

TEST_CASE("usage errors exit nonzero") {
  CHECK(run_cli("") != 0);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("generate teapot --n 4 --t 120") != 0);
  CHECK(run_cli("eval --scores nope.csv --truth nope.csv") != 0);
}

TEST_CASE("generate writes dataset, truth, and metadata") {
  auto dir = work_dir() / "gen_lorenz";
  REQUIRE(run_cli("generate lorenz96 --n 6 --f 10 --t 60 --seed 3 --out " +
                  dir.string()) == 0);

  auto data = granger::read_numeric_csv((dir / "data.csv").string());
  CHECK(data.rows == 60);
  CHECK(data.cols == 6);
  auto truth = granger::read_numeric_csv((dir / "truth.csv").string());
  double ones = 0;
  for (double v : truth.values) ones += v;
  CHECK(ones == 24);  // cyclic truth keeps four parents per row

  CHECK(fs::exists(dir / "data.meta.json"));
  auto inv = nlohmann::json::parse(slurp(dir / "invocation.json"));
  CHECK(inv["command"] == "generate");
  CHECK(inv["seed"] == 3);

  auto rerun = work_dir() / "gen_lorenz2";
  REQUIRE(run_cli("generate lorenz96 --n 6 --f 10 --t 60 --seed 3 --out " +
                  rerun.string()) == 0);
  CHECK(slurp(dir / "data.csv") == slurp(rerun / "data.csv"));
}

TEST_CASE("mixed generator tags edge kinds") {
  auto dir = work_dir() / "gen_mixed";
  REQUIRE(run_cli("generate mixed --n 5 --t 80 --ratio 1.0 --seed 2 --out " +
                  dir.string()) == 0);
  std::ifstream in(dir / "truth_edge_kind.csv");
  std::string line;
  std::getline(in, line);  // header
  std::size_t variance_edges = 0;
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    std::istringstream row(line);
    std::string cell;
    for (std::size_t j = 0; std::getline(row, cell, ','); ++j) {
      if (i == j) continue;  // self edges stay mean edges
      CHECK(cell != "mean");
      if (cell == "variance") ++variance_edges;
    }
  }
  CHECK(variance_edges > 0);
}

TEST_CASE("train writes artifacts and reruns bit-identically") {
  Fixture fx;
  CHECK(fs::exists(fx.run / "checkpoint.json"));
  CHECK(fs::exists(fx.run / "run_config.toml"));

  auto adj = granger::read_numeric_csv((fx.run / "adjacency.csv").string());
  CHECK(adj.rows == 4);
  CHECK(adj.cols == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(adj.values[i * 4 + i] == 1.0);  // forced diagonal

  auto report = nlohmann::json::parse(slurp(fx.run / "train_report.json"));
  CHECK(report["epochs"].size() == 2);
  CHECK(report["auroc"].is_number());
  CHECK(report["checkpoint"] == "checkpoint.json");

  std::string resolved = slurp(fx.run / "run_config.toml");
  CHECK(resolved.find("n_vars = 4") != std::string::npos);

  auto rerun = fx.root / "run_rerun";
  REQUIRE(run_cli("train --config " +
                  (fx.run / "run_config.toml").string() + " --out " +
                  rerun.string()) == 0);
  CHECK(slurp(fx.run / "adjacency.csv") == slurp(rerun / "adjacency.csv"));
  CHECK(slurp(fx.run / "checkpoint.json") ==
        slurp(rerun / "checkpoint.json"));
  CHECK(slurp(fx.run / "train_report.json") ==
        slurp(rerun / "train_report.json"));
}

TEST_CASE("json configs behave like toml configs") {
  Fixture fx;
  auto jcfg = fx.root / "cfg.json";
  {
    std::ofstream out(jcfg);
    out << R"({"model": {"lag": 1, "d_model": 8, "n_layers": 1, "n_heads": 2},
               "optimizer": {"learning_rate": 0.01, "batch_size": 16,
                             "epochs": 2, "lambda": 0.01, "seed": 3}})";
  }
  auto dir = fx.root / "run_json";
  REQUIRE(run_cli("train --config " + jcfg.string() + " --data " +
                  fx.data.string() + " --truth " + fx.truth.string() +
                  " --out " + dir.string()) == 0);
  CHECK(slurp(dir / "adjacency.csv") == slurp(fx.run / "adjacency.csv"));

  std::ofstream(jcfg) << R"({"model": {"banana": 1}})";
  CHECK(run_cli("train --config " + jcfg.string() + " --data " +
                fx.data.string() + " --out " + (fx.root / "x").string()) !=
        0);
}

TEST_CASE("overrides change the resolved config") {
  Fixture fx;
  auto dir = fx.root / "run_override";
  REQUIRE(run_cli("train --config " + fx.config.string() +
                  " -O model.d_model=12 -O optimizer.epochs=1 --data " +
                  fx.data.string() + " --out " + dir.string()) == 0);
  std::string resolved = slurp(dir / "run_config.toml");
  CHECK(resolved.find("d_model = 12") != std::string::npos);
  auto report = nlohmann::json::parse(slurp(dir / "train_report.json"));
  CHECK(report["epochs"].size() == 1);

  CHECK(run_cli("train --config " + fx.config.string() +
                " -O model.banana=1 --data " + fx.data.string()) != 0);
  CHECK(run_cli("train --data " + (fx.root / "absent.csv").string()) != 0);
}

TEST_CASE("eval writes report, curves, and heatmap") {
  Fixture fx;
  auto dir = fx.root / "evald";
  REQUIRE(run_cli("eval --scores " + (fx.run / "adjacency.csv").string() +
                  " --truth " + fx.truth.string() +
                  " --curves --heatmap --out " + dir.string()) == 0);

  auto report = nlohmann::json::parse(slurp(dir / "eval_report.json"));
  double auroc = report["auroc"];
  CHECK(auroc >= 0.0);
  CHECK(auroc <= 1.0);
  CHECK(report["diagonal_policy"] == "exclude");

  auto roc = granger::read_numeric_csv((dir / "roc.csv").string());
  REQUIRE(roc.header == std::vector<std::string>{"fpr", "tpr"});
  CHECK(roc.rows >= 2);
  auto pr = granger::read_numeric_csv((dir / "pr.csv").string());
  REQUIRE(pr.header == std::vector<std::string>{"recall", "precision"});
  CHECK(slurp(dir / "heatmap.svg").find("<svg") != std::string::npos);

  CHECK(run_cli("eval --scores " + (fx.run / "adjacency.csv").string() +
                " --truth " + fx.truth.string() + " --policy sideways") !=
        0);
}

TEST_CASE("ablate compares variants in one table") {
  Fixture fx;
  auto dir = fx.root / "abl";
  REQUIRE(run_cli("ablate --config " + fx.config.string() + " --data " +
                  fx.data.string() + " --truth " + fx.truth.string() +
                  " --out " + dir.string()) == 0);
  std::string table = slurp(dir / "ablation.csv");
  for (const char* name : {"variant", "base", "layerwise_masks",
                           "decoupled_heads", "residual_target",
                           "fixed_mask"})
    CHECK(table.find(name) != std::string::npos);
  CHECK(fs::exists(dir / "run_config.toml"));

  CHECK(run_cli("ablate --config " + fx.config.string() + " --data " +
                fx.data.string() + " --out " + dir.string()) != 0);
}

TEST_CASE("sweep ranks grid cells") {
  Fixture fx;
  auto dir = fx.root / "sw";
  REQUIRE(run_cli("sweep --config " + fx.config.string() + " --data " +
                  fx.data.string() + " --truth " + fx.truth.string() +
                  " --grid optimizer.learning_rate=0.01,0.001" +
                  " --mode one-at-a-time --out " + dir.string()) == 0);
  std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.find("assignment") != std::string::npos);
  CHECK(csv.find("optimizer.learning_rate=0.001") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  CHECK(run_cli("sweep --config " + fx.config.string() + " --data " +
                fx.data.string() + " --grid nonsense --out " +
                dir.string()) != 0);
}

TEST_CASE("prune refits on a given graph") {
  Fixture fx;
  auto dir = fx.root / "pruned";
  REQUIRE(run_cli("prune --data " + fx.data.string() + " --graph " +
                  fx.truth.string() +
                  " --families ols --lag 1 --out " + dir.string()) == 0);
  auto report = nlohmann::json::parse(slurp(dir / "prune_report.json"));
  REQUIRE(report["records"].size() == 1);
  CHECK(report["records"][0]["family"] == "ols");
  CHECK(double(report["records"][0]["pr_percent"]) > 0.0);

  CHECK(run_cli("prune --data " + fx.data.string() + " --graph " +
                fx.truth.string() + " --families teapot") != 0);
}

TEST_CASE("cost prints analytic counts and sweeps scales") {
  auto dir = work_dir() / "cost";
  REQUIRE(run_cli("cost --out " + dir.string()) == 0);
  auto report = nlohmann::json::parse(slurp(dir / "cost_report.json"));
  CHECK(report["param_count"] == 101157);  // --n 10 --l 5 --d 64 defaults

  REQUIRE(run_cli("cost --n 6 --l 2 --d 8 --sweep lag --values 2,4,8"
                  " --out " + dir.string()) == 0);
  auto sweep = granger::read_numeric_csv((dir / "cost_sweep.csv").string());
  CHECK(sweep.rows == 3);
  REQUIRE(sweep.header ==
          std::vector<std::string>{"lag", "params", "flops"});
  CHECK(slurp(dir / "scaling.svg").find("<svg") != std::string::npos);

  CHECK(run_cli("cost --sweep banana --values 1,2 --out " + dir.string()) !=
        0);
}
