#include "granger/datagen.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "granger/csv.hpp"

namespace granger {

namespace {

constexpr std::size_t kVarBurnIn = 100;
constexpr std::size_t kLorenzBurnInSamples = 1000;
constexpr double kLorenzInternalStep = 0.005;
constexpr std::size_t kLorenzStepsPerSample = 10;  // sample interval 0.05
constexpr std::size_t kMixedBurnIn = 100;
constexpr double kDivergenceBound = 1e6;

std::string sidecar_path(const std::string& path) {
  if (path.size() > 4 && path.ends_with(".csv"))
    return path.substr(0, path.size() - 4) + ".meta.json";
  return path + ".meta.json";
}

std::string edge_kind_path(const std::string& path) {
  if (path.size() > 4 && path.ends_with(".csv"))
    return path.substr(0, path.size() - 4) + "_edge_kind.csv";
  return path + "_edge_kind.csv";
}

}  // namespace

VarCoefficients draw_var_coefficients(std::size_t n_vars, std::size_t order,
                                      Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    VarCoefficients c;
    c.n_vars = n_vars;
    c.order = order;
    c.b.assign(order * n_vars * n_vars, 0.0);
    for (std::size_t i = 0; i < n_vars; ++i) {
      std::vector<std::size_t> parents{i};
      std::vector<std::size_t> others;
      for (std::size_t j = 0; j < n_vars; ++j)
        if (j != i) others.push_back(j);
      rng.shuffle(others);
      for (std::size_t p = 0; p < std::min<std::size_t>(2, others.size()); ++p)
        parents.push_back(others[p]);
      for (std::size_t j : parents)
        for (std::size_t k = 0; k < order; ++k) {
          double mag = rng.uniform(0.05, 0.3);
          double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          c.at(k, i, j) = sign * mag;
        }
    }
    if (companion_spectral_radius(c) < 0.97) return c;
  }
  throw std::runtime_error(
      "gen_var: no stable coefficient draw within 100 attempts");
}

double companion_spectral_radius(const VarCoefficients& c) {
  const std::size_t n = c.n_vars, k = c.order;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n * k, n * k);
  for (std::size_t lag = 0; lag < k; ++lag)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        comp(i, lag * n + j) = c.at(lag, i, j);
  for (std::size_t lag = 1; lag < k; ++lag)
    comp.block(lag * n, (lag - 1) * n, n, n).setIdentity();
  return comp.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> simulate_var(const VarCoefficients& c, std::size_t t_len,
                                 std::size_t burn_in, double noise_std,
                                 Rng& rng) {
  const std::size_t n = c.n_vars, k = c.order;
  std::size_t total = burn_in + t_len;
  std::vector<double> hist(k * n, 0.0);  // hist[0] is x_{t-1}, last is x_{t-k}
  std::vector<double> out;
  out.reserve(t_len * n);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0;
      for (std::size_t lag = 0; lag < k; ++lag) {
        const double* past = hist.data() + lag * n;
        for (std::size_t j = 0; j < n; ++j)
          v += c.at(lag, i, j) * past[j];
      }
      x[i] = v;
    }
    std::copy_backward(hist.begin(), hist.end() - n, hist.end());
    std::copy(x.begin(), x.end(), hist.begin());
    if (t >= burn_in) out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

CausalDataset gen_var(std::size_t n_vars, std::size_t t_len, std::size_t order,
                      std::uint64_t seed) {
  if (n_vars < 2) throw std::invalid_argument("gen_var: n_vars must be >= 2");
  if (order < 1) throw std::invalid_argument("gen_var: order must be >= 1");
  if (t_len <= order + kVarBurnIn)
    throw std::invalid_argument("gen_var: t_len must exceed order + burn-in");
  Rng root(seed);
  Rng coeff_rng = root.stream("coeffs");
  VarCoefficients c = draw_var_coefficients(n_vars, order, coeff_rng);
  Rng noise_rng = root.stream("noise");
  CausalDataset ds;
  ds.n_vars = n_vars;
  ds.t_len = t_len;
  ds.data = simulate_var(c, t_len, kVarBurnIn, 0.1, noise_rng);
  GroundTruthGraph g;
  g.n_vars = n_vars;
  g.adjacency.assign(n_vars * n_vars, 0);
  for (std::size_t i = 0; i < n_vars; ++i)
    for (std::size_t j = 0; j < n_vars; ++j)
      for (std::size_t k = 0; k < order; ++k)
        if (c.at(k, i, j) != 0.0) {
          g.adjacency[i * n_vars + j] = 1;
          break;
        }
  ds.truth = std::move(g);
  ds.meta.generator = "var";
  ds.meta.seed = seed;
  ds.meta.params = {{"n_vars", double(n_vars)},
                    {"t_len", double(t_len)},
                    {"order", double(order)}};
  return ds;
}

void lorenz96_deriv(std::span<const double> x, double forcing,
                    std::span<double> dx) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    double next = x[(i + 1) % n];
    double prev = x[(i + n - 1) % n];
    double prev2 = x[(i + n - 2) % n];
    dx[i] = (next - prev2) * prev - x[i] + forcing;
  }
}

void lorenz96_rk4_step(std::span<double> x, double forcing, double h) {
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  lorenz96_deriv(x, forcing, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  lorenz96_deriv(tmp, forcing, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  lorenz96_deriv(tmp, forcing, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  lorenz96_deriv(tmp, forcing, k4);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

CausalDataset gen_lorenz96(std::size_t n_vars, double forcing,
                           std::size_t t_len, std::uint64_t seed) {
  if (n_vars < 4)
    throw std::invalid_argument("gen_lorenz96: n_vars must be >= 4");
  if (forcing <= 0.0)
    throw std::invalid_argument("gen_lorenz96: forcing must be positive");
  if (t_len == 0) throw std::invalid_argument("gen_lorenz96: t_len must be > 0");
  Rng root(seed);
  Rng init_rng = root.stream("init");
  Rng obs_rng = root.stream("obs_noise");
  std::vector<double> x(n_vars);
  for (auto& v : x) v = forcing + init_rng.normal(0.0, 0.1);

  CausalDataset ds;
  ds.n_vars = n_vars;
  ds.t_len = t_len;
  ds.data.reserve(t_len * n_vars);
  std::size_t total_samples = kLorenzBurnInSamples + t_len;
  for (std::size_t s = 0; s < total_samples; ++s) {
    for (std::size_t sub = 0; sub < kLorenzStepsPerSample; ++sub) {
      lorenz96_rk4_step(x, forcing, kLorenzInternalStep);
      for (double v : x)
        if (std::abs(v) > kDivergenceBound)
          throw std::runtime_error(
              "gen_lorenz96: trajectory diverged; use a smaller "
              "integration step");
    }
    if (s >= kLorenzBurnInSamples)
      for (double v : x) ds.data.push_back(v + obs_rng.normal(0.0, 0.1));
  }

  GroundTruthGraph g;
  g.n_vars = n_vars;
  g.adjacency.assign(n_vars * n_vars, 0);
  for (std::size_t i = 0; i < n_vars; ++i)
    for (long off : {-2L, -1L, 0L, 1L}) {
      std::size_t j = (i + n_vars + off) % n_vars;
      g.adjacency[i * n_vars + j] = 1;
    }
  ds.truth = std::move(g);
  ds.meta.generator = "lorenz96";
  ds.meta.seed = seed;
  ds.meta.params = {{"n_vars", double(n_vars)},
                    {"forcing", forcing},
                    {"t_len", double(t_len)}};
  return ds;
}

MixedWeights draw_stable_mixed_weights(std::size_t n_vars, double density,
                                       double variance_ratio, Rng& rng) {
  const std::size_t n = n_vars;
  std::size_t n_offdiag = n * (n - 1);
  auto n_edges =
      static_cast<std::size_t>(std::llround(density * double(n_offdiag)));
  auto n_variance =
      static_cast<std::size_t>(std::llround(variance_ratio * double(n_edges)));
  for (int attempt = 0; attempt < 100; ++attempt) {
    MixedWeights w;
    w.n_vars = n;
    w.w_mu.assign(n * n, 0.0);
    w.w_sigma.assign(n * n, 0.0);
    w.kind.assign(n * n, EdgeKind::kNone);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) pairs.emplace_back(i, j);
    rng.shuffle(pairs);
    for (std::size_t e = 0; e < n_edges; ++e) {
      auto [i, j] = pairs[e];
      if (e < n_variance) {
        w.w_sigma[i * n + j] = rng.uniform(0.2, 0.5);
        w.kind[i * n + j] = EdgeKind::kVariance;
      } else {
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        w.w_mu[i * n + j] = sign * rng.uniform(0.2, 0.5);
        w.kind[i * n + j] = EdgeKind::kMean;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      w.w_mu[i * n + i] = sign * rng.uniform(0.2, 0.5);
      w.kind[i * n + i] = EdgeKind::kMean;
    }
    // Second-moment recursion: m_t <= (W_mu o W_mu + W_sigma) m_{t-1} + const.
    Eigen::MatrixXd second(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        second(i, j) =
            w.w_mu[i * n + j] * w.w_mu[i * n + j] + w.w_sigma[i * n + j];
    if (second.eigenvalues().cwiseAbs().maxCoeff() < 0.98) return w;
  }
  throw std::runtime_error(
      "gen_mixed_physics: no stable weight draw within 100 attempts");
}

CausalDataset gen_mixed_physics(std::size_t n_vars, std::size_t t_len,
                                double variance_ratio, double density,
                                std::uint64_t seed) {
  if (n_vars < 2)
    throw std::invalid_argument("gen_mixed_physics: n_vars must be >= 2");
  if (density <= 0.0 || density >= 1.0)
    throw std::invalid_argument("gen_mixed_physics: density must be in (0,1)");
  if (variance_ratio < 0.0 || variance_ratio > 1.0)
    throw std::invalid_argument(
        "gen_mixed_physics: variance_ratio must be in [0,1]");
  Rng root(seed);
  const std::size_t n = n_vars;
  for (int redraw = 0; redraw < 50; ++redraw) {
    Rng weight_rng = root.stream("weights", redraw);
    MixedWeights w =
        draw_stable_mixed_weights(n_vars, density, variance_ratio, weight_rng);
    Rng noise_rng = root.stream("noise", redraw);
    const std::size_t lag = w.lag;
    std::size_t total = kMixedBurnIn + t_len + lag;
    std::vector<double> series(total * n, 0.0);
    bool diverged = false;
    for (std::size_t t = lag; t < total && !diverged; ++t) {
      const double* past = series.data() + (t - lag) * n;
      double* cur = series.data() + t * n;
      for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0, var = w.beta;
        for (std::size_t j = 0; j < n; ++j) {
          mu += w.w_mu[i * n + j] * past[j];
          var += w.w_sigma[i * n + j] * past[j] * past[j];
        }
        cur[i] = mu + std::sqrt(var) * noise_rng.normal();
        if (std::abs(cur[i]) > kDivergenceBound) diverged = true;
      }
    }
    if (diverged) continue;
    CausalDataset ds;
    ds.n_vars = n;
    ds.t_len = t_len;
    ds.data.assign(series.begin() + (kMixedBurnIn + lag) * n, series.end());
    GroundTruthGraph g;
    g.n_vars = n;
    g.adjacency.assign(n * n, 0);
    g.edge_kind = w.kind;
    for (std::size_t e = 0; e < n * n; ++e)
      g.adjacency[e] = w.kind[e] != EdgeKind::kNone ? 1 : 0;
    ds.truth = std::move(g);
    ds.meta.generator = "mixed_physics";
    ds.meta.seed = seed;
    ds.meta.params = {{"n_vars", double(n)},
                      {"t_len", double(t_len)},
                      {"variance_ratio", variance_ratio},
                      {"density", density}};
    return ds;
  }
  throw std::runtime_error(
      "gen_mixed_physics: divergent sample after 50 redraws");
}

CausalDataset regenerate(const DatasetMeta& meta) {
  auto sz = [&](const char* k) {
    return static_cast<std::size_t>(meta.param(k));
  };
  if (meta.generator == "var")
    return gen_var(sz("n_vars"), sz("t_len"), sz("order"), meta.seed);
  if (meta.generator == "lorenz96")
    return gen_lorenz96(sz("n_vars"), meta.param("forcing"), sz("t_len"),
                        meta.seed);
  if (meta.generator == "mixed_physics")
    return gen_mixed_physics(sz("n_vars"), sz("t_len"),
                             meta.param("variance_ratio"),
                             meta.param("density"), meta.seed);
  throw std::invalid_argument("regenerate: unknown generator '" +
                              meta.generator + "'");
}

void save_dataset(const CausalDataset& ds, const std::string& path) {
  write_numeric_csv(path, default_var_names(ds.n_vars), ds.data.data(),
                    ds.t_len, ds.n_vars);
  nlohmann::json j;
  j["generator"] = ds.meta.generator;
  j["seed"] = ds.meta.seed;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : ds.meta.params) params[k] = v;
  j["params"] = params;
  if (ds.trajectory_starts.size() > 1)
    j["trajectory_starts"] = ds.trajectory_starts;
  std::ofstream out(sidecar_path(path));
  if (!out) throw std::runtime_error("cannot write " + sidecar_path(path));
  out << j.dump(2) << '\n';
}

void export_truth(const CausalDataset& ds, const std::string& path) {
  if (!ds.truth)
    throw std::invalid_argument("export_truth: dataset has no ground truth");
  const GroundTruthGraph& g = *ds.truth;
  std::vector<std::string> cells(g.n_vars * g.n_vars);
  for (std::size_t e = 0; e < cells.size(); ++e)
    cells[e] = g.adjacency[e] ? "1" : "0";
  write_string_csv(path, default_var_names(g.n_vars), cells, g.n_vars,
                   g.n_vars);
  if (g.has_edge_kinds()) {
    for (std::size_t e = 0; e < cells.size(); ++e)
      cells[e] = edge_kind_name(g.edge_kind[e]);
    write_string_csv(edge_kind_path(path), default_var_names(g.n_vars), cells,
                     g.n_vars, g.n_vars);
  }
}

}  // namespace granger
