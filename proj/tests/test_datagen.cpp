#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "granger/csv.hpp"
#include "granger/datagen.hpp"
#include "granger/rng.hpp"

using granger::CausalDataset;
using granger::EdgeKind;
using granger::Rng;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "granger_datagen_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Spectral radius upper estimate via Gelfand's formula: ||C^256||_F^(1/256),
// computed with plain repeated squaring.  Independent of the Eigen-based
// production check.
double gelfand_radius(const std::vector<double>& c, std::size_t n) {
  std::vector<double> m = c, tmp(n * n);
  for (int squarings = 0; squarings < 8; ++squarings) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += m[i * n + k] * m[k * n + j];
        tmp[i * n + j] = s;
      }
    // Normalize to dodge under/overflow, tracking the log of the scale.
    m.swap(tmp);
    double norm = 0.0;
    for (double v : m) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    static thread_local double log_scale;
    if (squarings == 0) log_scale = 0.0;
    log_scale = 2.0 * log_scale + std::log(norm);
    for (double& v : m) v /= norm;
    if (squarings == 7) return std::exp(log_scale / 256.0);
  }
  return 0.0;
}

std::vector<double> companion_matrix(const granger::VarCoefficients& c) {
  std::size_t nk = c.n_vars * c.order;
  std::vector<double> comp(nk * nk, 0.0);
  for (std::size_t lag = 0; lag < c.order; ++lag)
    for (std::size_t i = 0; i < c.n_vars; ++i)
      for (std::size_t j = 0; j < c.n_vars; ++j)
        comp[i * nk + lag * c.n_vars + j] = c.at(lag, i, j);
  for (std::size_t lag = 1; lag < c.order; ++lag)
    for (std::size_t i = 0; i < c.n_vars; ++i)
      comp[(lag * c.n_vars + i) * nk + (lag - 1) * c.n_vars + i] = 1.0;
  return comp;
}

double phi_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("var generator") {
  CausalDataset ds = granger::gen_var(10, 500, 3, 42);
  REQUIRE(ds.n_vars == 10);
  REQUIRE(ds.t_len == 500);
  REQUIRE(ds.data.size() == 5000);
  REQUIRE(ds.truth.has_value());

  SUBCASE("self edges always present") {
    for (std::size_t i = 0; i < 10; ++i) CHECK(ds.truth->adj(i, i) == 1);
  }
  SUBCASE("values are finite and nontrivial") {
    double mx = 0.0;
    for (double v : ds.data) {
      CHECK(std::isfinite(v));
      mx = std::max(mx, std::abs(v));
    }
    CHECK(mx > 0.01);
  }
  SUBCASE("emitted coefficient draw is stable by an independent estimate") {
    // Replays the generator's coefficient substream.
    Rng coeff_rng = Rng(42).stream("coeffs");
    auto c = granger::draw_var_coefficients(10, 3, coeff_rng);
    CHECK(granger::companion_spectral_radius(c) < 0.97);
    auto comp = companion_matrix(c);
    CHECK(gelfand_radius(comp, 30) < 1.0);
    // The replayed draw must describe exactly the emitted truth graph.
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        bool any = false;
        for (std::size_t k = 0; k < 3; ++k) any = any || c.at(k, i, j) != 0.0;
        CHECK(int(any) == int(ds.truth->adj(i, j)));
      }
  }
  SUBCASE("zero coefficients, zero noise collapse to the fixed point") {
    granger::VarCoefficients c;
    c.n_vars = 4;
    c.order = 2;
    c.b.assign(2 * 16, 0.0);
    Rng rng(1);
    auto series = granger::simulate_var(c, 50, 20, 0.0, rng);
    for (double v : series) CHECK(v == 0.0);
  }
  SUBCASE("regeneration is bit-identical") {
    CausalDataset again = granger::gen_var(10, 500, 3, 42);
    CHECK(again.data == ds.data);
    CausalDataset from_meta = granger::regenerate(ds.meta);
    CHECK(from_meta.data == ds.data);
    CHECK(from_meta.truth->adjacency == ds.truth->adjacency);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(granger::gen_var(1, 500, 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(granger::gen_var(10, 500, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(granger::gen_var(10, 100, 3, 0), std::invalid_argument);
  }
}

TEST_CASE("lorenz96 generator") {
  SUBCASE("constant state at the forcing value has zero derivative") {
    std::vector<double> x(7, 10.0), dx(7);
    granger::lorenz96_deriv(x, 10.0, dx);
    for (double v : dx) CHECK(v == 0.0);
  }
  SUBCASE("every rk4 step along one time unit matches a 10x finer split") {
    // Burn in first: generated samples live on the attractor, and the
    // transient fall from x = F passes through much faster states.
    Rng rng(5);
    std::vector<double> x(10);
    for (auto& v : x) v = 10.0 + rng.normal(0.0, 0.1);
    for (int s = 0; s < 10000; ++s) granger::lorenz96_rk4_step(x, 10.0, 0.005);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      std::vector<double> fine = x;
      for (int sub = 0; sub < 10; ++sub)
        granger::lorenz96_rk4_step(fine, 10.0, 0.0005);
      granger::lorenz96_rk4_step(x, 10.0, 0.005);
      for (std::size_t i = 0; i < 10; ++i)
        worst = std::max(worst, std::abs(x[i] - fine[i]));
      x = fine;  // continue along the reference trajectory
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("truth graph is the cyclic stencil") {
    CausalDataset ds = granger::gen_lorenz96(10, 10.0, 50, 7);
    CHECK(ds.truth->edge_count() == 40);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        long diff = (long(j) - long(i) + 10) % 10;
        bool expected = diff == 8 || diff == 9 || diff == 0 || diff == 1;
        CHECK(int(ds.truth->adj(i, j)) == int(expected));
      }
  }
  SUBCASE("trajectories stay bounded at both forcings") {
    for (double f : {10.0, 40.0}) {
      CausalDataset ds = granger::gen_lorenz96(10, f, 1000, 99);
      double mx = 0.0;
      for (double v : ds.data) mx = std::max(mx, std::abs(v));
      CHECK(mx < 100.0);
    }
  }
  SUBCASE("regeneration is bit-identical") {
    CausalDataset a = granger::gen_lorenz96(10, 40.0, 100, 3);
    CausalDataset b = granger::regenerate(a.meta);
    CHECK(a.data == b.data);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(granger::gen_lorenz96(3, 10.0, 100, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(granger::gen_lorenz96(10, -1.0, 100, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("mixed physics generator") {
  CausalDataset ds = granger::gen_mixed_physics(10, 2000, 0.5, 0.3, 11);
  REQUIRE(ds.truth.has_value());
  REQUIRE(ds.truth->has_edge_kinds());

  SUBCASE("density and disjointness") {
    std::size_t offdiag = 0, variance = 0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        if (i == j) continue;
        if (ds.truth->adj(i, j)) {
          ++offdiag;
          CHECK(ds.truth->kind(i, j) != EdgeKind::kNone);
          if (ds.truth->kind(i, j) == EdgeKind::kVariance) ++variance;
        } else {
          CHECK(ds.truth->kind(i, j) == EdgeKind::kNone);
        }
      }
    CHECK(offdiag == 27);  // round(0.3 * 90)
    CHECK(variance == 14);  // round(0.5 * 27)
  }
  SUBCASE("weights put each edge on exactly one side") {
    Rng rng(123);
    auto w = granger::draw_stable_mixed_weights(10, 0.3, 0.5, rng);
    for (std::size_t e = 0; e < 100; ++e) {
      bool mu = w.w_mu[e] != 0.0, sig = w.w_sigma[e] != 0.0;
      CHECK(!(mu && sig));
      if (sig) CHECK(w.w_sigma[e] > 0.0);
    }
  }
  SUBCASE("conditional mean ignores a variance parent (Monte Carlo)") {
    Rng rng(123);
    auto w = granger::draw_stable_mixed_weights(10, 0.3, 0.5, rng);
    std::size_t ti = 0, tj = 0;
    bool found = false;
    for (std::size_t i = 0; i < 10 && !found; ++i)
      for (std::size_t j = 0; j < 10 && !found; ++j)
        if (w.kind[i * 10 + j] == EdgeKind::kVariance) {
          ti = i;
          tj = j;
          found = true;
        }
    REQUIRE(found);
    const int kDraws = 100000;
    auto mc_mean = [&](double parent_value) {
      std::vector<double> lag(10, 0.3);
      lag[tj] = parent_value;
      double mu = 0.0, var = w.beta;
      for (std::size_t j = 0; j < 10; ++j) {
        mu += w.w_mu[ti * 10 + j] * lag[j];
        var += w.w_sigma[ti * 10 + j] * lag[j] * lag[j];
      }
      Rng noise(parent_value > 0 ? 400u : 500u);
      double acc = 0.0, acc2 = 0.0;
      for (int d = 0; d < kDraws; ++d) {
        double x = mu + std::sqrt(var) * noise.normal();
        acc += x;
        acc2 += x * x;
      }
      double m = acc / kDraws;
      double sd = std::sqrt(std::max(acc2 / kDraws - m * m, 0.0));
      return std::pair{m, sd / std::sqrt(double(kDraws))};
    };
    auto [m_low, se_low] = mc_mean(-1.0);
    auto [m_high, se_high] = mc_mean(1.0);
    double se = std::sqrt(se_low * se_low + se_high * se_high);
    CHECK(std::abs(m_high - m_low) < 3.0 * se);
  }
  SUBCASE("variance signal is detectable by an F test") {
    CausalDataset big = granger::gen_mixed_physics(10, 10000, 1.0, 0.3, 21);
    std::size_t ti = 0, tj = 0;
    bool found = false;
    for (std::size_t i = 0; i < 10 && !found; ++i)
      for (std::size_t j = 0; j < 10 && !found; ++j)
        if (i != j && big.truth->kind(i, j) == EdgeKind::kVariance) {
          ti = i;
          tj = j;
          found = true;
        }
    REQUIRE(found);
    std::vector<std::pair<double, double>> samples;  // |parent lag|, target
    for (std::size_t t = 1; t < big.t_len; ++t)
      samples.emplace_back(std::abs(big.value(t - 1, tj)), big.value(t, ti));
    std::sort(samples.begin(), samples.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    std::size_t q = samples.size() / 4;
    auto variance_of = [](auto begin, auto end) {
      double m = 0.0;
      std::size_t n = 0;
      for (auto it = begin; it != end; ++it, ++n) m += it->second;
      m /= double(n);
      double v = 0.0;
      for (auto it = begin; it != end; ++it) {
        double d = it->second - m;
        v += d * d;
      }
      return v / double(n - 1);
    };
    double v_low = variance_of(samples.begin(), samples.begin() + q);
    double v_high = variance_of(samples.end() - q, samples.end());
    double f = v_high / v_low;
    CHECK(f > 1.0);
    // Large-sample p-value: under H0, ln F is approximately normal with
    // variance 2/(n1-1) + 2/(n2-1).
    double z = std::log(f) /
               std::sqrt(2.0 / double(q - 1) + 2.0 / double(q - 1));
    double p = phi_upper_tail(z);
    CHECK(p < 0.01);
  }
  SUBCASE("regeneration is bit-identical") {
    CausalDataset again = granger::regenerate(ds.meta);
    CHECK(again.data == ds.data);
  }
}

TEST_CASE("dataset and truth files") {
  SUBCASE("lorenz truth export has row sums 4") {
    CausalDataset ds = granger::gen_lorenz96(5, 10.0, 20, 1);
    auto path = tmp_file("lorenz5_truth.csv");
    granger::export_truth(ds, path.string());
    auto table = granger::read_numeric_csv(path.string());
    REQUIRE(table.rows == 5);
    REQUIRE(table.cols == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += table.values[i * 5 + j];
      CHECK(s == 4.0);
    }
    // Round trip preserves the matrix.
    for (std::size_t e = 0; e < 25; ++e)
      CHECK(int(table.values[e]) == int(ds.truth->adjacency[e]));
  }
  SUBCASE("var truth export is header plus N rows") {
    CausalDataset ds = granger::gen_var(10, 300, 3, 2);
    auto path = tmp_file("var10_truth.csv");
    granger::export_truth(ds, path.string());
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 11);
  }
  SUBCASE("data csv round-trips bit-exactly with sidecar metadata") {
    CausalDataset ds = granger::gen_mixed_physics(6, 400, 0.75, 0.3, 9);
    auto path = tmp_file("mixed.csv");
    granger::save_dataset(ds, path.string());
    auto table = granger::read_numeric_csv(path.string());
    REQUIRE(table.rows == 400);
    REQUIRE(table.cols == 6);
    for (std::size_t e = 0; e < ds.data.size(); ++e)
      CHECK(table.values[e] == ds.data[e]);
    CHECK(std::filesystem::exists(tmp_file("mixed.meta.json")));
    granger::export_truth(ds, tmp_file("mixed_truth.csv").string());
    CHECK(std::filesystem::exists(tmp_file("mixed_truth_edge_kind.csv")));
  }
  SUBCASE("export without truth is rejected") {
    CausalDataset ds;
    ds.n_vars = 2;
    ds.t_len = 1;
    ds.data = {0.0, 0.0};
    CHECK_THROWS_AS(granger::export_truth(ds, tmp_file("none.csv").string()),
                    std::invalid_argument);
  }
}
