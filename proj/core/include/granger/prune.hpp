#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "granger/dataset.hpp"

namespace granger {

// One model family fitted twice on identical splits and seeds: once with
// every variable visible (vanilla) and once with each node's inputs cut to
// its parent set.
struct PruneRecord {
  std::string family;  // "ols" or "mlp"
  std::size_t vanilla_params = 0;
  std::size_t pruned_params = 0;
  double pr_percent = 0.0;  // 100 * (1 - pruned / vanilla)
  double vanilla_mse = 0.0;
  double pruned_mse = 0.0;
  double mse_r_percent = 0.0;  // 100 * (vanilla - pruned) / vanilla
};

struct PruneReport {
  std::vector<PruneRecord> records;
};

struct PruneConfig {
  std::size_t lag = 1;
  double train_fraction = 0.8;
  bool standardize = true;
  std::size_t hidden_width = 32;  // mlp hidden layer
  std::size_t epochs = 100;       // mlp
  double learning_rate = 1e-3;    // mlp
  std::size_t batch_size = 32;    // mlp
  std::uint64_t seed = 0;         // mlp
  std::size_t jobs = 1;           // parallel per-node mlp fits

  void validate() const;
};

// P(i): the causes listed in row i plus variable i itself, sorted and
// deduplicated.  Rejects entries other than 0 and 1.
std::vector<std::vector<std::size_t>> parent_sets(const GroundTruthGraph& graph);

// Per node, least squares of x_t on `lag` lags of its parent set plus an
// intercept, solved by normal equations with a 1e-8 ridge.  Parameters are
// coefficients plus intercepts summed over nodes.
PruneRecord fit_ols(const CausalDataset& ds_train, const CausalDataset& ds_test,
                    const std::vector<std::vector<std::size_t>>& parents,
                    std::size_t lag);

// Per node, a one-hidden-layer GELU network on the same lagged features,
// trained with adaptive moments.  Deterministic given cfg.seed; the vanilla
// and pruned variants share per-node seed streams.
PruneRecord fit_mlp(const CausalDataset& ds_train, const CausalDataset& ds_test,
                    const std::vector<std::vector<std::size_t>>& parents,
                    const PruneConfig& cfg);

// Splits ds chronologically, optionally standardizes with training-side
// statistics, and runs every requested family.  Records come back in a
// fixed family order no matter how `families` is ordered.
PruneReport prune_report(const GroundTruthGraph& graph, const CausalDataset& ds,
                         const std::vector<std::string>& families,
                         const PruneConfig& cfg);

std::string prune_report_json(const PruneReport& report);

// Aligned-column text table, one row per family.
std::string format_prune_table(const PruneReport& report);

}  // namespace granger
