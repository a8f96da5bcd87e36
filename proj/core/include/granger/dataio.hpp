#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "granger/dataset.hpp"
#include "granger/tensor.hpp"

namespace granger {

// One supervised batch: inputs[b,i,:] holds the lag window of variable i in
// chronological order (rows t-L .. t-1), targets[b,i] holds row t.
struct WindowBatch {
  Tensor inputs;                      // B x N x L
  Tensor targets;                     // B x N
  std::vector<std::size_t> t_indices;  // 0-based target row per sample
};

struct SplitSpec {
  double calibration_fraction = 0.2;
  enum class Mode { kChronological, kBySeed } mode = Mode::kChronological;
  std::uint64_t seed = 0;  // used by kBySeed only
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std per variable
};

// Reads a data CSV, or a directory of CSVs treated as one trajectory each
// (lexicographic order).  An optional truth CSV must be N x N for N data
// columns.  A .meta.json sidecar is picked up when present.
CausalDataset load_dataset(const std::string& data_path,
                           const std::string& truth_path = "");

Standardizer compute_standardizer(const CausalDataset& ds);
CausalDataset apply_standardizer(const Standardizer& s,
                                 const CausalDataset& ds);
CausalDataset invert_standardizer(const Standardizer& s,
                                  const CausalDataset& ds);

// Convenience wrapper: fit on ds and transform it.
std::pair<CausalDataset, Standardizer> standardize(const CausalDataset& ds);

// All valid windows of every trajectory, deterministically shuffled, then
// chunked; the final partial batch is kept.
std::vector<WindowBatch> make_windows(const CausalDataset& ds,
                                      std::size_t lag, std::size_t batch_size,
                                      std::uint64_t shuffle_seed);

// Chronological mode cuts each trajectory at floor(fraction * length) so the
// calibration part strictly precedes the test part in time.  kBySeed deals
// out whole trajectories in seeded random order until the calibration side
// holds its fraction of rows.
std::pair<CausalDataset, CausalDataset> split(const CausalDataset& ds,
                                              const SplitSpec& spec);

}  // namespace granger
