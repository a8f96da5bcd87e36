// Command-line front end: generate | train | eval | ablate | sweep | prune
// | cost.  Every command with an output directory drops an invocation.json
// with its resolved arguments; train-family commands also write the
// resolved run config as TOML.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "granger/cost.hpp"
#include "granger/csv.hpp"
#include "granger/datagen.hpp"
#include "granger/dataio.hpp"
#include "granger/eval.hpp"
#include "granger/model.hpp"
#include "granger/prune.hpp"
#include "granger/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

fs::path ensure_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_invocation(const fs::path& dir, const std::string& verb,
                      json args) {
  args["command"] = verb;
  write_text(dir / "invocation.json", args.dump(2) + "\n");
}

// Binary adjacency CSV (variable-name header, entries 0/1).
granger::GroundTruthGraph load_graph_csv(const std::string& path) {
  granger::CsvTable t = granger::read_numeric_csv(path);
  if (t.rows != t.cols)
    throw std::runtime_error(path + ": adjacency must be square, got " +
                             std::to_string(t.rows) + "x" +
                             std::to_string(t.cols));
  granger::GroundTruthGraph g;
  g.n_vars = t.rows;
  g.adjacency.resize(t.rows * t.cols);
  for (std::size_t e = 0; e < t.values.size(); ++e) {
    if (t.values[e] != 0.0 && t.values[e] != 1.0)
      throw std::runtime_error(path + ": adjacency entries must be 0 or 1");
    g.adjacency[e] = t.values[e] == 1.0 ? 1 : 0;
  }
  return g;
}

// TOML natively; a .json config is flattened section by section onto the
// defaults through the same override path, so both spellings share one
// validator.
granger::RunConfig load_config_any(const std::string& path) {
  if (path.size() > 5 && path.ends_with(".json")) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j = json::parse(in);
    granger::RunConfig cfg;
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object())
        throw std::runtime_error("config " + path +
                                 ": top level must be sections");
      for (const auto& [key, value] : body.items()) {
        std::string text =
            value.is_string() ? value.get<std::string>() : value.dump();
        granger::apply_override(cfg, section + "." + key + "=" + text);
      }
    }
    return cfg;
  }
  return granger::load_run_config(path);
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

struct GenerateArgs {
  std::string generator;
  std::size_t n = 10;
  std::size_t t = 500;
  std::uint64_t seed = 0;
  std::size_t order = 3;
  double forcing = 10.0;
  double ratio = 0.5;
  double density = 0.15;
  std::string out = ".";
};

int cmd_generate(const GenerateArgs& a) {
  granger::CausalDataset ds;
  if (a.generator == "var")
    ds = granger::gen_var(a.n, a.t, a.order, a.seed);
  else if (a.generator == "lorenz96")
    ds = granger::gen_lorenz96(a.n, a.forcing, a.t, a.seed);
  else if (a.generator == "mixed")
    ds = granger::gen_mixed_physics(a.n, a.t, a.ratio, a.density, a.seed);
  else
    throw std::runtime_error("unknown generator '" + a.generator +
                             "' (try var, lorenz96, mixed)");

  fs::path dir = ensure_dir(a.out);
  granger::save_dataset(ds, (dir / "data.csv").string());
  granger::export_truth(ds, (dir / "truth.csv").string());
  write_invocation(dir, "generate",
                   {{"generator", a.generator},
                    {"n", a.n},
                    {"t", a.t},
                    {"seed", a.seed},
                    {"order", a.order},
                    {"forcing", a.forcing},
                    {"ratio", a.ratio},
                    {"density", a.density}});

  std::cout << "wrote " << (dir / "data.csv").string() << " (T=" << ds.t_len
            << ", N=" << ds.n_vars << ") and truth with "
            << ds.truth->edge_count() << " edges\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string truth;
  std::int64_t seed = -1;
  std::string out = ".";
};

granger::RunConfig resolve_run_config(const TrainArgs& a) {
  granger::RunConfig cfg;
  if (!a.config.empty()) cfg = load_config_any(a.config);
  for (const std::string& assignment : a.overrides)
    granger::apply_override(cfg, assignment);
  if (!a.data.empty()) cfg.dataset = a.data;
  if (!a.truth.empty()) cfg.truth = a.truth;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (cfg.dataset.empty())
    throw std::runtime_error("no dataset: set --data or [data] dataset");
  return cfg;
}

json train_args_json(const TrainArgs& a) {
  return {{"config", a.config},
          {"overrides", a.overrides},
          {"data", a.data},
          {"truth", a.truth},
          {"seed", a.seed}};
}

void write_adjacency_csv(const granger::AdjacencyEstimate& adj,
                         std::size_t n, const fs::path& path) {
  granger::write_numeric_csv(path.string(), granger::default_var_names(n),
                             adj.scores.data().data(), n, n);
}

int cmd_train(const TrainArgs& a) {
  granger::RunConfig cfg = resolve_run_config(a);
  granger::CausalDataset ds = granger::load_dataset(cfg.dataset, cfg.truth);

  fs::path dir = ensure_dir(a.out);
  granger::TrainReport report =
      granger::train(ds, cfg, (dir / "checkpoint.json").string());

  cfg.model = report.model_config;
  write_text(dir / "run_config.toml", granger::format_run_config(cfg));
  write_adjacency_csv(report.adjacency, report.model_config.n_vars,
                      dir / "adjacency.csv");

  json epochs = json::array();
  for (const granger::EpochStats& e : report.epochs)
    epochs.push_back({{"prediction_loss", e.prediction_loss},
                      {"sparsity_term", e.sparsity_term},
                      {"total_loss", e.total_loss}});
  json j = {{"epochs", epochs},
            {"param_count", report.params.count_values()},
            {"standardized", report.standardized},
            {"checkpoint",
             fs::path(report.checkpoint_path).filename().string()},
            {"objective", granger::objective_name(report.model_config.objective)}};
  if (ds.truth)
    j["auroc"] = granger::auroc(report.adjacency.scores.data(), *ds.truth,
                                granger::DiagonalPolicy::kExclude);
  write_text(dir / "train_report.json", j.dump(2) + "\n");
  write_invocation(dir, "train", train_args_json(a));

  for (std::size_t e = 0; e < report.epochs.size(); ++e)
    std::cout << "epoch " << e + 1 << "/" << report.epochs.size()
              << "  prediction " << report.epochs[e].prediction_loss
              << "  sparsity " << report.epochs[e].sparsity_term << "\n";
  std::cout << "trained in " << report.wall_seconds << "s";
  if (j.contains("auroc")) std::cout << ", auroc " << double(j["auroc"]);
  std::cout << "; wrote " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string scores;
  std::string truth;
  std::string policy = "exclude";
  std::string threshold = "density";
  double density = 0.0;
  bool curves = false;
  bool heatmap = false;
  std::string out = ".";
};

int cmd_eval(const EvalArgs& a) {
  granger::CsvTable t = granger::read_numeric_csv(a.scores);
  if (t.rows != t.cols)
    throw std::runtime_error(a.scores + ": score matrix must be square");
  granger::GroundTruthGraph truth = load_graph_csv(a.truth);
  if (truth.n_vars != t.rows)
    throw std::runtime_error("score matrix is " + std::to_string(t.rows) +
                             "x" + std::to_string(t.rows) + " but truth has " +
                             std::to_string(truth.n_vars) + " variables");

  granger::DiagonalPolicy policy =
      granger::diagonal_policy_from_name(a.policy);
  granger::ThresholdSpec spec;
  spec.mode = a.threshold == "cluster"
                  ? granger::ThresholdSpec::Mode::kCluster
                  : granger::ThresholdSpec::Mode::kDensity;
  if (a.threshold != "cluster" && a.threshold != "density")
    throw std::runtime_error("unknown threshold mode '" + a.threshold + "'");
  spec.density = a.density;

  granger::EvalReport report =
      granger::evaluate(t.values, truth, policy, spec);

  fs::path dir = ensure_dir(a.out);
  granger::write_eval_report_json(report,
                                  (dir / "eval_report.json").string());
  if (a.curves) {
    granger::write_curve_csv(granger::roc_points(t.values, truth, policy),
                             "fpr", "tpr", (dir / "roc.csv").string());
    granger::write_curve_csv(granger::pr_points(t.values, truth, policy),
                             "recall", "precision",
                             (dir / "pr.csv").string());
  }
  if (a.heatmap)
    granger::write_heatmap_svg(truth, t.values,
                               (dir / "heatmap.svg").string());
  write_invocation(dir, "eval",
                   {{"scores", a.scores},
                    {"truth", a.truth},
                    {"policy", a.policy},
                    {"threshold", a.threshold},
                    {"density", a.density},
                    {"curves", a.curves},
                    {"heatmap", a.heatmap}});

  std::cout << "auroc " << report.auroc << "  auprc " << report.auprc
            << "  shd " << report.shd << "  f1 " << report.f1 << "\n";
  return 0;
}

struct AblateArgs {
  TrainArgs train;
  double train_fraction = 0.8;
};

int cmd_ablate(const AblateArgs& a) {
  granger::RunConfig base = resolve_run_config(a.train);
  granger::CausalDataset ds = granger::load_dataset(base.dataset, base.truth);
  if (!ds.truth)
    throw std::runtime_error(
        "the fixed-mask variant needs a ground-truth graph (--truth)");

  granger::SplitSpec split_spec;
  split_spec.calibration_fraction = a.train_fraction;
  auto [head, tail] = granger::split(ds, split_spec);

  struct Variant {
    std::string name;
    granger::RunConfig cfg;
    bool fixed_mask = false;
  };
  std::vector<Variant> variants;
  variants.push_back({"base", base, false});
  Variant v = {"layerwise_masks", base, false};
  v.cfg.model.layerwise_masks = true;
  variants.push_back(v);
  v = {"decoupled_heads", base, false};
  v.cfg.model.decoupled_heads = true;
  variants.push_back(v);
  v = {"residual_target", base, false};
  v.cfg.model.residual_target = true;
  variants.push_back(v);
  variants.push_back({"fixed_mask", base, true});

  fs::path dir = ensure_dir(a.train.out);
  std::vector<std::string> cells;
  std::cout << std::left << std::setw(18) << "variant" << std::right
            << std::setw(12) << "params" << std::setw(16) << "val_loss"
            << std::setw(10) << "auroc" << std::setw(10) << "seconds"
            << "\n";
  for (const Variant& var : variants) {
    auto t0 = std::chrono::steady_clock::now();
    granger::TrainReport report =
        var.fixed_mask
            ? granger::fixed_mask_train(head, var.cfg, *ds.truth)
            : granger::train(head, var.cfg);
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    granger::CausalDataset eval_part =
        report.standardized
            ? granger::apply_standardizer(report.standardizer, tail)
            : tail;
    double val = granger::evaluate_loss(eval_part, report.params,
                                        report.model_config);
    double roc = granger::auroc(report.adjacency.scores.data(), *ds.truth,
                                granger::DiagonalPolicy::kExclude);
    cells.push_back(var.name);
    cells.push_back(std::to_string(report.params.count_values()));
    cells.push_back(fmt(val));
    cells.push_back(fmt(roc));
    std::cout << std::left << std::setw(18) << var.name << std::right
              << std::setw(12) << report.params.count_values()
              << std::setw(16) << std::setprecision(6) << val
              << std::setw(10) << std::setprecision(4) << roc
              << std::setw(10) << std::setprecision(3) << seconds << "\n";
  }

  granger::write_string_csv((dir / "ablation.csv").string(),
                            {"variant", "params", "validation_loss", "auroc"},
                            cells, variants.size(), 4);
  granger::RunConfig resolved = base;
  resolved.model.n_vars = ds.n_vars;
  write_text(dir / "run_config.toml", granger::format_run_config(resolved));
  json inv = train_args_json(a.train);
  inv["train_fraction"] = a.train_fraction;
  write_invocation(dir, "ablate", inv);
  std::cout << "wrote " << (dir / "ablation.csv").string() << "\n";
  return 0;
}

struct SweepArgs {
  TrainArgs train;
  std::vector<std::string> grid;
  std::string mode = "one-at-a-time";
  double train_fraction = 0.8;
  std::size_t jobs = 1;
};

int cmd_sweep(const SweepArgs& a) {
  granger::RunConfig base = resolve_run_config(a.train);
  granger::CausalDataset ds = granger::load_dataset(base.dataset, base.truth);

  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const std::string& spec : a.grid) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("--grid expects key=v1,v2,... got '" + spec +
                               "'");
    std::vector<std::string> values = split_list(spec.substr(eq + 1));
    if (values.empty())
      throw std::runtime_error("--grid '" + spec + "' lists no values");
    grid.emplace_back(spec.substr(0, eq), values);
  }
  if (grid.empty()) throw std::runtime_error("no --grid axes given");

  auto table = granger::hyperparam_sweep(
      ds, base, grid, granger::sweep_mode_from_name(a.mode),
      a.train_fraction, a.jobs);

  fs::path dir = ensure_dir(a.train.out);
  granger::write_sweep_csv(table, (dir / "sweep.csv").string());
  granger::RunConfig resolved = base;
  resolved.model.n_vars = ds.n_vars;
  write_text(dir / "run_config.toml", granger::format_run_config(resolved));
  json inv = train_args_json(a.train);
  inv["grid"] = a.grid;
  inv["mode"] = a.mode;
  inv["train_fraction"] = a.train_fraction;
  inv["jobs"] = a.jobs;
  write_invocation(dir, "sweep", inv);

  std::size_t failed = 0;
  for (const granger::SweepCell& cell : table)
    if (!cell.ok()) ++failed;
  std::cout << table.size() << " cells, " << failed << " failed; wrote "
            << (dir / "sweep.csv").string() << "\n";
  if (!table.empty() && table.front().ok()) {
    std::cout << "best:";
    for (const auto& [key, value] : table.front().assignment)
      std::cout << " " << key << "=" << value;
    std::cout << "  validation_loss " << table.front().validation_loss;
    if (table.front().auroc) std::cout << "  auroc " << *table.front().auroc;
    std::cout << "\n";
  }
  return 0;
}

struct PruneArgs {
  std::string data;
  std::string graph;
  std::string families = "ols,mlp";
  granger::PruneConfig cfg;
  bool no_standardize = false;
  std::string out = ".";
};

int cmd_prune(const PruneArgs& a) {
  granger::CausalDataset ds = granger::load_dataset(a.data);
  granger::GroundTruthGraph graph = load_graph_csv(a.graph);
  granger::PruneConfig cfg = a.cfg;
  cfg.standardize = !a.no_standardize;

  granger::PruneReport report =
      granger::prune_report(graph, ds, split_list(a.families), cfg);

  fs::path dir = ensure_dir(a.out);
  write_text(dir / "prune_report.json",
             granger::prune_report_json(report));
  write_invocation(dir, "prune",
                   {{"data", a.data},
                    {"graph", a.graph},
                    {"families", a.families},
                    {"lag", cfg.lag},
                    {"train_fraction", cfg.train_fraction},
                    {"standardize", cfg.standardize},
                    {"hidden_width", cfg.hidden_width},
                    {"epochs", cfg.epochs},
                    {"learning_rate", cfg.learning_rate},
                    {"batch_size", cfg.batch_size},
                    {"seed", cfg.seed},
                    {"jobs", cfg.jobs}});
  std::cout << granger::format_prune_table(report);
  std::cout << "wrote " << (dir / "prune_report.json").string() << "\n";
  return 0;
}

struct CostArgs {
  granger::ModelConfig cfg;
  std::string objective = "mse";
  std::string sweep_axis;
  std::string sweep_values;
  std::string out;
};

int cmd_cost(const CostArgs& a) {
  granger::ModelConfig cfg = a.cfg;
  cfg.objective = granger::objective_from_name(a.objective);
  granger::CostReport report = granger::cost_report(cfg);
  std::cout << granger::cost_report_json(report) << "\n";

  if (a.out.empty()) {
    if (!a.sweep_axis.empty())
      throw std::runtime_error("--sweep needs --out for its artifacts");
    return 0;
  }
  fs::path dir = ensure_dir(a.out);
  write_text(dir / "cost_report.json", granger::cost_report_json(report));
  if (!a.sweep_axis.empty()) {
    std::vector<std::size_t> values;
    for (const std::string& v : split_list(a.sweep_values))
      values.push_back(std::stoull(v));
    auto rows = granger::cost_sweep(cfg, a.sweep_axis, values);
    granger::write_cost_sweep_csv(rows, a.sweep_axis,
                                  (dir / "cost_sweep.csv").string());
    granger::write_scaling_svg(rows, a.sweep_axis,
                               (dir / "scaling.svg").string());
  }
  write_invocation(dir, "cost",
                   {{"n", cfg.n_vars},
                    {"l", cfg.lag},
                    {"d", cfg.d_model},
                    {"layers", cfg.n_layers},
                    {"heads", cfg.n_heads},
                    {"ffn", cfg.ffn_width},
                    {"objective", a.objective},
                    {"layerwise", cfg.layerwise_masks},
                    {"decoupled", cfg.decoupled_heads},
                    {"sweep_axis", a.sweep_axis},
                    {"sweep_values", a.sweep_values}});
  return 0;
}

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "run config (.toml or .json)");
  cmd->add_option("-O,--override", a.overrides,
                  "section.key=value applied after the config file");
  cmd->add_option("--data", a.data, "data CSV or directory of CSVs");
  cmd->add_option("--truth", a.truth, "ground-truth adjacency CSV");
  cmd->add_option("--seed", a.seed, "overrides optimizer.seed");
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Granger-causal graph discovery via masked attention"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* c_gen =
      app.add_subcommand("generate", "synthesize a benchmark dataset");
  c_gen->add_option("generator", gen.generator, "var | lorenz96 | mixed")
      ->required();
  c_gen->add_option("--n", gen.n, "variable count")->capture_default_str();
  c_gen->add_option("--t", gen.t, "sample count")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "generator seed")
      ->capture_default_str();
  c_gen->add_option("--order", gen.order, "var: lag order")
      ->capture_default_str();
  c_gen->add_option("--f", gen.forcing, "lorenz96: forcing constant")
      ->capture_default_str();
  c_gen->add_option("--ratio", gen.ratio,
                    "mixed: fraction of variance edges")
      ->capture_default_str();
  c_gen->add_option("--density", gen.density, "mixed: off-diagonal density")
      ->capture_default_str();
  c_gen->add_option("--out", gen.out, "output directory")
      ->capture_default_str();

  TrainArgs train;
  CLI::App* c_train =
      app.add_subcommand("train", "fit the forecaster and the edge scores");
  add_train_flags(c_train, train);

  EvalArgs eval;
  CLI::App* c_eval =
      app.add_subcommand("eval", "score an adjacency against ground truth");
  c_eval->add_option("--scores", eval.scores, "score matrix CSV")->required();
  c_eval->add_option("--truth", eval.truth, "ground-truth adjacency CSV")
      ->required();
  c_eval->add_option("--policy", eval.policy, "include | exclude diagonal")
      ->capture_default_str();
  c_eval->add_option("--threshold", eval.threshold, "density | cluster")
      ->capture_default_str();
  c_eval->add_option("--density", eval.density,
                     "edge density for thresholding, 0 matches the truth")
      ->capture_default_str();
  c_eval->add_flag("--curves", eval.curves, "write roc.csv and pr.csv");
  c_eval->add_flag("--heatmap", eval.heatmap, "write heatmap.svg");
  c_eval->add_option("--out", eval.out, "output directory")
      ->capture_default_str();

  AblateArgs ablate;
  CLI::App* c_ablate = app.add_subcommand(
      "ablate", "compare architecture variants and a truth-frozen mask");
  add_train_flags(c_ablate, ablate.train);
  c_ablate
      ->add_option("--train-fraction", ablate.train_fraction,
                   "leading fraction used for fitting")
      ->capture_default_str();

  SweepArgs sweep;
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "grid search over config overrides");
  add_train_flags(c_sweep, sweep.train);
  c_sweep
      ->add_option("--grid", sweep.grid,
                   "section.key=v1,v2,... (repeatable)")
      ->required();
  c_sweep->add_option("--mode", sweep.mode, "one-at-a-time | cartesian")
      ->capture_default_str();
  c_sweep
      ->add_option("--train-fraction", sweep.train_fraction,
                   "leading fraction used for fitting")
      ->capture_default_str();
  c_sweep->add_option("--jobs", sweep.jobs, "parallel workers")
      ->capture_default_str();

  PruneArgs prune;
  CLI::App* c_prune = app.add_subcommand(
      "prune", "refit per-node forecasters on a discovered graph");
  c_prune->add_option("--data", prune.data, "data CSV")->required();
  c_prune->add_option("--graph", prune.graph, "binary adjacency CSV")
      ->required();
  c_prune->add_option("--families", prune.families, "subset of ols,mlp")
      ->capture_default_str();
  c_prune->add_option("--lag", prune.cfg.lag, "history length")
      ->capture_default_str();
  c_prune
      ->add_option("--train-fraction", prune.cfg.train_fraction,
                   "leading fraction used for fitting")
      ->capture_default_str();
  c_prune->add_option("--width", prune.cfg.hidden_width, "mlp hidden width")
      ->capture_default_str();
  c_prune->add_option("--epochs", prune.cfg.epochs, "mlp epochs")
      ->capture_default_str();
  c_prune->add_option("--lr", prune.cfg.learning_rate, "mlp learning rate")
      ->capture_default_str();
  c_prune->add_option("--batch", prune.cfg.batch_size, "mlp batch size")
      ->capture_default_str();
  c_prune->add_option("--seed", prune.cfg.seed, "mlp seed")
      ->capture_default_str();
  c_prune->add_option("--jobs", prune.cfg.jobs, "parallel node fits")
      ->capture_default_str();
  c_prune->add_flag("--no-standardize", prune.no_standardize,
                    "skip train-side standardization");
  c_prune->add_option("--out", prune.out, "output directory")
      ->capture_default_str();

  CostArgs cost;
  cost.cfg.n_vars = 10;
  cost.cfg.lag = 5;
  cost.cfg.d_model = 64;
  CLI::App* c_cost = app.add_subcommand(
      "cost", "analytic parameter and flop counts for a configuration");
  c_cost->add_option("--n", cost.cfg.n_vars, "variable count")
      ->capture_default_str();
  c_cost->add_option("--l", cost.cfg.lag, "history length")
      ->capture_default_str();
  c_cost->add_option("--d", cost.cfg.d_model, "model width")
      ->capture_default_str();
  c_cost->add_option("--layers", cost.cfg.n_layers, "encoder depth")
      ->capture_default_str();
  c_cost->add_option("--heads", cost.cfg.n_heads, "attention heads")
      ->capture_default_str();
  c_cost->add_option("--ffn", cost.cfg.ffn_width, "ffn width, 0 means 4d")
      ->capture_default_str();
  c_cost->add_option("--objective", cost.objective, "mse | nll")
      ->capture_default_str();
  c_cost->add_flag("--layerwise", cost.cfg.layerwise_masks,
                   "one mask per layer");
  c_cost->add_flag("--decoupled", cost.cfg.decoupled_heads,
                   "one output head per variable");
  c_cost->add_option("--sweep", cost.sweep_axis, "sweep axis: n_vars | lag");
  c_cost->add_option("--values", cost.sweep_values,
                     "comma-separated sweep values");
  c_cost->add_option("--out", cost.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (c_gen->parsed()) return cmd_generate(gen);
    if (c_train->parsed()) return cmd_train(train);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_ablate->parsed()) return cmd_ablate(ablate);
    if (c_sweep->parsed()) return cmd_sweep(sweep);
    if (c_prune->parsed()) return cmd_prune(prune);
    if (c_cost->parsed()) return cmd_cost(cost);
  } catch (const std::exception& e) {
    std::cerr << "granger " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
