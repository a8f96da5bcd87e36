#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "granger/dataio.hpp"
#include "granger/dataset.hpp"
#include "granger/model.hpp"

namespace granger {

enum class OptimizerKind { kAdam, kSgd };

std::string optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

// Everything one run needs.  Serialized as TOML next to run artifacts.
struct RunConfig {
  ModelConfig model;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string dataset;  // data path, used by the command-line tools
  std::string truth;    // optional truth path
  bool standardize = true;

  // Run-level fields only; the model block is validated at train time,
  // after n_vars resolution against the dataset.
  void validate() const;
};

// TOML subset with [model], [optimizer], [data] sections whose keys match
// the field names 1:1.  Unknown sections or keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

// "section.key=value", e.g. "optimizer.learning_rate=0.01".
void apply_override(RunConfig& cfg, const std::string& assignment);

struct EpochStats {
  double prediction_loss = 0.0;
  double sparsity_term = 0.0;
  double total_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  AdjacencyEstimate adjacency;  // detached final scores
  std::string checkpoint_path;  // empty when none was written
  ModelConfig model_config;     // resolved, n_vars filled in
  ModelParams params;
  Standardizer standardizer;  // fitted on the training data
  bool standardized = false;
};

// Raised when a step produces a nonfinite loss; the message carries the
// global step index and the prediction/sparsity breakdown.
class TrainError : public std::runtime_error {
 public:
  TrainError(const std::string& msg, std::size_t step)
      : std::runtime_error(msg), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Adaptive-moment or plain-SGD update over the tensors that require
// gradients.  step() applies to .data() and clears .grad.
class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, const RunConfig& cfg);
  void step();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Joint optimization of weights and edge logits.  Deterministic given the
// dataset bytes and the config: the seed derives separate init, dropout,
// and shuffle streams.  Writes a checkpoint when checkpoint_path is set.
TrainReport train(const CausalDataset& ds, const RunConfig& cfg,
                  const std::string& checkpoint_path = "");

// Same loop with the edge logits frozen at +-100 realizing frozen_mask and
// excluded from the update.  diag_force is zeroed so the mask's own
// diagonal decides self edges.
TrainReport fixed_mask_train(const CausalDataset& ds, const RunConfig& cfg,
                             const GroundTruthGraph& frozen_mask,
                             const std::string& checkpoint_path = "");

// Mean prediction-term loss over every window of ds, dropout off, no
// sparsity term.  Follows cfg.objective.
double evaluate_loss(const CausalDataset& ds, const ModelParams& p,
                     const ModelConfig& cfg);

// Mean squared error of the mean prediction, whatever the objective.
double evaluate_mse(const CausalDataset& ds, const ModelParams& p,
                    const ModelConfig& cfg);

enum class SweepMode { kOneAtATime, kCartesian };

std::string sweep_mode_name(SweepMode m);
SweepMode sweep_mode_from_name(const std::string& name);

struct SweepCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  RunConfig config;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> auroc;  // off-diagonal, set when truth is known
  std::string error;            // nonempty when this cell failed

  bool ok() const { return error.empty(); }
};

// Trains every grid cell on the leading chronological split and scores the
// held-out tail.  Cell failures are recorded in the table, not thrown.
// Rows come back sorted by validation loss, failed cells last.
std::vector<SweepCell> hyperparam_sweep(
    const CausalDataset& ds, const RunConfig& base_cfg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    SweepMode mode, double train_fraction = 0.8, std::size_t jobs = 1);

void write_sweep_csv(const std::vector<SweepCell>& table,
                     const std::string& path);

}  // namespace granger
