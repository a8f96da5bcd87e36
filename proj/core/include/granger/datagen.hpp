#pragma once

#include <span>
#include <string>

#include "granger/dataset.hpp"
#include "granger/rng.hpp"

namespace granger {

// Sparse stable VAR(order) with N(0, 0.1^2) innovations.  Ground truth has
// an edge j -> i iff any lag matrix has a nonzero (i, j) coefficient.
CausalDataset gen_var(std::size_t n_vars, std::size_t t_len, std::size_t order,
                      std::uint64_t seed);

// Lorenz-96 integrated with fixed-step RK4 (internal step 0.005, sampled
// every 0.05), observation noise N(0, 0.01), cyclic ground truth
// j in {i-2, i-1, i, i+1}.
CausalDataset gen_lorenz96(std::size_t n_vars, double forcing,
                           std::size_t t_len, std::uint64_t seed);

// Lag-1 process whose off-diagonal parents act either on the conditional
// mean or on the conditional variance, never both.  variance_ratio is the
// fraction of off-diagonal edges assigned to the variance side.
CausalDataset gen_mixed_physics(std::size_t n_vars, std::size_t t_len,
                                double variance_ratio, double density,
                                std::uint64_t seed);

// Rebuilds a dataset bit-identically from its recorded metadata.
CausalDataset regenerate(const DatasetMeta& meta);

// Data CSV plus a .meta.json sidecar holding generator, params and seed.
void save_dataset(const CausalDataset& ds, const std::string& path);

// Adjacency as 0/1 CSV with variable-name header; when edge kinds exist an
// "_edge_kind" sibling file tags each cell none/mean/variance.
void export_truth(const CausalDataset& ds, const std::string& path);

// Building blocks below are exposed so tests can verify the numerics by an
// independent route.

struct VarCoefficients {
  std::size_t n_vars = 0;
  std::size_t order = 0;
  std::vector<double> b;  // order * N * N, b[k][i][j] multiplies x_{t-k-1}^j

  double at(std::size_t k, std::size_t i, std::size_t j) const {
    return b[(k * n_vars + i) * n_vars + j];
  }
  double& at(std::size_t k, std::size_t i, std::size_t j) {
    return b[(k * n_vars + i) * n_vars + j];
  }
};

// Per row: self edge plus two off-diagonal parents, magnitudes in
// [0.05, 0.3] with random sign, redrawn until the companion spectral radius
// is below 0.97.  Throws after 100 attempts.
VarCoefficients draw_var_coefficients(std::size_t n_vars, std::size_t order,
                                      Rng& rng);

double companion_spectral_radius(const VarCoefficients& c);

std::vector<double> simulate_var(const VarCoefficients& c, std::size_t t_len,
                                 std::size_t burn_in, double noise_std,
                                 Rng& rng);

void lorenz96_deriv(std::span<const double> x, double forcing,
                    std::span<double> dx);
void lorenz96_rk4_step(std::span<double> x, double forcing, double h);

struct MixedWeights {
  std::size_t n_vars = 0;
  std::size_t lag = 1;
  double beta = 0.2;
  std::vector<double> w_mu;     // N * N
  std::vector<double> w_sigma;  // N * N, entries >= 0
  std::vector<EdgeKind> kind;   // N * N
};

// Draws edge assignments and weights until the second-moment recursion
// matrix |W_mu| o |W_mu| + W_sigma has spectral radius below 0.98.
MixedWeights draw_stable_mixed_weights(std::size_t n_vars, double density,
                                       double variance_ratio, Rng& rng);

}  // namespace granger
