#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "granger/cost.hpp"
#include "granger/csv.hpp"
#include "granger/rng.hpp"

using granger::CostReport;
using granger::CostSweepRow;
using granger::ModelConfig;
using granger::ModelParams;
using granger::Objective;
using granger::Rng;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "granger_cost_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ModelConfig reference_config() {
  ModelConfig cfg;
  cfg.n_vars = 10;
  cfg.lag = 5;
  cfg.d_model = 64;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  return cfg;
}

std::size_t live_count(const ModelConfig& cfg) {
  Rng rng(1);
  return ModelParams::init(cfg, rng).count_values();
}

}  // namespace

TEST_CASE("reference configuration totals") {
  CostReport r = granger::cost_report(reference_config());

  CHECK(r.param_count == 101157);
  CHECK(std::fabs(static_cast<double>(r.param_count) - 100500.0) / 100500.0 <
        0.05);
  CHECK(r.flops == 2067580);
  CHECK(std::fabs(static_cast<double>(r.flops) - 2.05e6) / 2.05e6 < 0.10);

  REQUIRE(r.breakdown.size() == 5);
  CHECK(r.breakdown[0].module == "embedding");
  CHECK(r.breakdown[1].module == "mask");
  CHECK(r.breakdown[2].module == "attention");
  CHECK(r.breakdown[3].module == "ffn");
  CHECK(r.breakdown[4].module == "heads");
  std::size_t params = 0, flops = 0;
  for (const auto& item : r.breakdown) {
    params += item.params;
    flops += item.flops;
  }
  CHECK(params == r.param_count);
  CHECK(flops == r.flops);
  CHECK(r.flop_formula.find("MAC = 2") != std::string::npos);
}

TEST_CASE("analytic count matches live parameter arrays") {
  ModelConfig ref = reference_config();
  CHECK(granger::count_params(ref) == live_count(ref));

  ModelConfig nll = ref;
  nll.objective = Objective::kNll;
  CHECK(granger::count_params(nll) == live_count(nll));

  ModelConfig wide = ref;
  wide.layerwise_masks = true;
  wide.decoupled_heads = true;
  wide.objective = Objective::kNll;
  CHECK(granger::count_params(wide) == live_count(wide));

  ModelConfig small;
  small.n_vars = 3;
  small.lag = 2;
  small.d_model = 8;
  small.n_layers = 1;
  small.n_heads = 2;
  small.ffn_width = 12;
  CHECK(granger::count_params(small) == live_count(small));
}

TEST_CASE("parameter deltas follow the architecture") {
  ModelConfig ref = reference_config();
  std::size_t base = granger::count_params(ref);

  ModelConfig nll = ref;
  nll.objective = Objective::kNll;
  CHECK(granger::count_params(nll) - base == 65);  // one d+1 variance head

  ModelConfig doubled = ref;
  doubled.n_vars = 20;
  // only e_id (delta_n * d) and theta (n2^2 - n1^2) touch N
  CHECK(granger::count_params(doubled) - base == 10 * 64 + (400 - 100));

  ModelConfig longer = ref;
  longer.lag = 50;
  CHECK(granger::count_params(longer) - base == 45 * 64);  // w_emb only
}

TEST_CASE("flops scale linearly in history length") {
  ModelConfig ref = reference_config();
  std::vector<double> xs, ys;
  for (std::size_t l : {5, 50, 200, 1000, 2000}) {
    ModelConfig c = ref;
    c.lag = l;
    xs.push_back(static_cast<double>(l));
    ys.push_back(static_cast<double>(granger::count_flops(c)));
  }
  double powers[] = {1.0, 0.0};
  auto [coef, r2] = granger::powerfit(xs, ys, powers);
  CHECK(r2 > 0.999999);
  CHECK(coef[0] == doctest::Approx(1280.0));  // 2Nd per history step

  ModelConfig l2000 = ref;
  l2000.lag = 2000;
  double ratio = static_cast<double>(granger::count_flops(l2000)) /
                 static_cast<double>(granger::count_flops(ref));
  CHECK(std::fabs(ratio / (4.60 / 2.05) - 1.0) < 0.02);
}

TEST_CASE("flops scale quadratically in variable count") {
  ModelConfig ref = reference_config();
  std::vector<double> xs, ys;
  for (std::size_t n : {500, 1000, 2000}) {
    ModelConfig c = ref;
    c.n_vars = n;
    xs.push_back(static_cast<double>(n));
    ys.push_back(static_cast<double>(granger::count_flops(c)));
  }
  double powers[] = {2.0, 1.0};
  auto [coef, r2] = granger::powerfit(xs, ys, powers);
  CHECK(r2 > 0.9999);
  CHECK(coef[0] > 0.0);
}

TEST_CASE("cost sweep") {
  ModelConfig ref = reference_config();
  auto rows = granger::cost_sweep(ref, "lag", {1, 2, 4});
  REQUIRE(rows.size() == 3);
  for (const CostSweepRow& row : rows) {
    ModelConfig c = ref;
    c.lag = row.value;
    CHECK(row.params == granger::count_params(c));
    CHECK(row.flops == granger::count_flops(c));
  }

  auto by_n = granger::cost_sweep(ref, "n_vars", {10, 20});
  CHECK(by_n[1].params - by_n[0].params == 940);

  CHECK_THROWS_AS(granger::cost_sweep(ref, "d_model", {8}),
                  std::invalid_argument);
  CHECK_THROWS_AS(granger::cost_sweep(ref, "lag", {}), std::invalid_argument);

  auto path = tmp_file("sweep.csv");
  granger::write_cost_sweep_csv(rows, "lag", path.string());
  auto table = granger::read_numeric_csv(path.string());
  REQUIRE(table.header ==
          std::vector<std::string>{"lag", "params", "flops"});
  REQUIRE(table.rows == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(table.values[r * 3 + 0] == static_cast<double>(rows[r].value));
    CHECK(table.values[r * 3 + 1] == static_cast<double>(rows[r].params));
    CHECK(table.values[r * 3 + 2] == static_cast<double>(rows[r].flops));
  }
}

TEST_CASE("scaling chart") {
  auto rows = granger::cost_sweep(reference_config(), "n_vars",
                                  {10, 100, 1000});
  auto path = tmp_file("scaling.svg");
  granger::write_scaling_svg(rows, "n_vars", path.string());
  std::ifstream in(path);
  std::string svg((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
  CHECK(svg.find("n_vars") != std::string::npos);
  CHECK(svg.find("flops") != std::string::npos);
  CHECK(svg.find("params") != std::string::npos);

  CHECK_THROWS_AS(granger::write_scaling_svg({}, "lag", path.string()),
                  std::invalid_argument);
}

TEST_CASE("cost report json") {
  std::string j = granger::cost_report_json(
      granger::cost_report(reference_config()));
  for (const char* key :
       {"\"param_count\"", "\"flops\"", "\"flop_formula\"", "\"breakdown\"",
        "\"embedding\"", "\"mask\"", "\"attention\"", "\"ffn\"", "\"heads\""})
    CHECK(j.find(key) != std::string::npos);
}

TEST_CASE("power fits") {
  std::vector<double> xs = {1, 2, 3, 4};
  std::vector<double> line = {5, 8, 11, 14};  // 3x + 2
  double lin_powers[] = {1.0, 0.0};
  auto [lc, lr2] = granger::powerfit(xs, line, lin_powers);
  CHECK(lc[0] == doctest::Approx(3.0));
  CHECK(lc[1] == doctest::Approx(2.0));
  CHECK(lr2 == doctest::Approx(1.0));

  std::vector<double> quad = {3, 10, 21, 36};  // 2x^2 + x
  double quad_powers[] = {2.0, 1.0};
  auto [qc, qr2] = granger::powerfit(xs, quad, quad_powers);
  CHECK(qc[0] == doctest::Approx(2.0));
  CHECK(qc[1] == doctest::Approx(1.0));
  CHECK(qr2 == doctest::Approx(1.0));

  std::vector<double> noisy = {1, 4, 2, 8};
  auto [nc, nr2] = granger::powerfit(xs, noisy, lin_powers);
  CHECK(nr2 < 1.0);
  CHECK(nr2 > 0.0);

  std::vector<double> short_y = {1, 2};
  CHECK_THROWS_AS(granger::powerfit(xs, short_y, lin_powers),
                  std::invalid_argument);
  double many_powers[] = {4.0, 3.0, 2.0, 1.0, 0.0};
  CHECK_THROWS_AS(granger::powerfit(std::vector<double>{1.0, 2.0},
                                    std::vector<double>{1.0, 2.0},
                                    many_powers),
                  std::invalid_argument);
}
