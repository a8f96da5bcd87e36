#include "granger/prune.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "granger/tensor.hpp"
#include "granger/train.hpp"

namespace granger {

namespace {

constexpr double kRidge = 1e-8;

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-lim, lim);
  return t;
}

// Lagged features of one node's parent set: row per target time step,
// columns parent-major then lag 1..L.
struct NodeDesign {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t rows = 0;
  std::size_t f = 0;
};

NodeDesign build_design(const CausalDataset& ds, std::size_t node,
                        const std::vector<std::size_t>& parents,
                        std::size_t lag) {
  NodeDesign d;
  d.f = parents.size() * lag;
  for (std::size_t k = 0; k < ds.n_trajectories(); ++k) {
    std::size_t begin = ds.trajectory_begin(k), end = ds.trajectory_end(k);
    if (end - begin < lag + 1) continue;
    for (std::size_t t = begin + lag; t < end; ++t) {
      for (std::size_t p : parents)
        for (std::size_t l = 1; l <= lag; ++l)
          d.x.push_back(ds.value(t - l, p));
      d.y.push_back(ds.value(t, node));
      ++d.rows;
    }
  }
  return d;
}

void validate_parents(const std::vector<std::vector<std::size_t>>& parents,
                      std::size_t n, const char* where) {
  if (parents.size() != n)
    throw std::invalid_argument(std::string(where) + ": expected " +
                                std::to_string(n) + " parent sets, got " +
                                std::to_string(parents.size()));
  for (const auto& set : parents) {
    if (set.empty())
      throw std::invalid_argument(std::string(where) +
                                  ": parent sets must be nonempty");
    for (std::size_t k = 0; k < set.size(); ++k) {
      if (set[k] >= n)
        throw std::invalid_argument(std::string(where) +
                                    ": parent index out of range");
      if (k > 0 && set[k] <= set[k - 1])
        throw std::invalid_argument(std::string(where) +
                                    ": parent sets must be sorted and unique");
    }
  }
}

void check_dims(const CausalDataset& train, const CausalDataset& test,
                const char* where) {
  if (train.n_vars == 0 || train.n_vars != test.n_vars)
    throw std::invalid_argument(
        std::string(where) + ": train and test must share a variable count");
}

std::vector<std::vector<std::size_t>> full_sets(std::size_t n) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  return std::vector<std::vector<std::size_t>>(n, all);
}

struct VariantFit {
  std::size_t params = 0;
  double sse = 0.0;
  std::size_t test_rows = 0;
};

PruneRecord make_record(std::string family, const VariantFit& vanilla,
                        const VariantFit& pruned) {
  PruneRecord r;
  r.family = std::move(family);
  r.vanilla_params = vanilla.params;
  r.pruned_params = pruned.params;
  r.pr_percent = 100.0 * (1.0 - static_cast<double>(pruned.params) /
                                    static_cast<double>(vanilla.params));
  r.vanilla_mse = vanilla.sse / static_cast<double>(vanilla.test_rows);
  r.pruned_mse = pruned.sse / static_cast<double>(pruned.test_rows);
  r.mse_r_percent = 100.0 * (r.vanilla_mse - r.pruned_mse) / r.vanilla_mse;
  return r;
}

VariantFit ols_variant(const CausalDataset& train, const CausalDataset& test,
                       const std::vector<std::vector<std::size_t>>& sets,
                       std::size_t lag) {
  VariantFit fit;
  for (std::size_t i = 0; i < train.n_vars; ++i) {
    NodeDesign tr = build_design(train, i, sets[i], lag);
    NodeDesign te = build_design(test, i, sets[i], lag);
    std::size_t cols = tr.f + 1;  // intercept
    if (tr.rows < cols)
      throw std::invalid_argument(
          "fit_ols: node " + std::to_string(i) + " has " +
          std::to_string(tr.rows) + " training rows for " +
          std::to_string(cols) + " coefficients");
    if (te.rows == 0)
      throw std::invalid_argument("fit_ols: test split has no full window");

    Eigen::MatrixXd x(tr.rows, cols);
    Eigen::VectorXd y(tr.rows);
    for (std::size_t r = 0; r < tr.rows; ++r) {
      for (std::size_t c = 0; c < tr.f; ++c) x(r, c) = tr.x[r * tr.f + c];
      x(r, tr.f) = 1.0;
      y(r) = tr.y[r];
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += kRidge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd beta = ldlt.solve(x.transpose() * y);
    if (ldlt.info() != Eigen::Success || !beta.allFinite())
      throw std::runtime_error("fit_ols: design for node " +
                               std::to_string(i) +
                               " is rank-deficient even after ridge");

    for (std::size_t r = 0; r < te.rows; ++r) {
      double pred = beta(static_cast<Eigen::Index>(te.f));
      for (std::size_t c = 0; c < te.f; ++c)
        pred += beta(static_cast<Eigen::Index>(c)) * te.x[r * te.f + c];
      double err = pred - te.y[r];
      fit.sse += err * err;
    }
    fit.params += cols;
    fit.test_rows += te.rows;
  }
  return fit;
}

struct NodeNet {
  Tensor w1, b1, w2, b2;

  Tensor forward(const Tensor& x) const {
    Tensor h = gelu(add(matmul(x, w1), b1));
    return add(matmul(h, w2), b2);
  }
  std::vector<Tensor> all() const { return {w1, b1, w2, b2}; }
};

// One node's network, trained to convergence; returns its test SSE.
double mlp_node(const NodeDesign& tr, const NodeDesign& te,
                const PruneConfig& cfg, const Rng& node_rng,
                std::size_t node) {
  std::size_t w = cfg.hidden_width;
  Rng init_rng = node_rng.stream("init");
  NodeNet net;
  net.w1 = xavier({tr.f, w}, tr.f, w, init_rng);
  net.b1 = Tensor::zeros({w}, true);
  net.w2 = xavier({w, 1}, w, 1, init_rng);
  net.b2 = Tensor::zeros({1}, true);

  RunConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  Optimizer opt(net.all(), opt_cfg);

  std::vector<std::size_t> order(tr.rows);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = node_rng.stream("shuffle", epoch);
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < tr.rows; start += cfg.batch_size) {
      std::size_t b = std::min(cfg.batch_size, tr.rows - start);
      std::vector<double> bx(b * tr.f), by(b);
      for (std::size_t r = 0; r < b; ++r) {
        std::size_t src = order[start + r];
        std::copy_n(tr.x.begin() + static_cast<std::ptrdiff_t>(src * tr.f),
                    tr.f, bx.begin() + static_cast<std::ptrdiff_t>(r * tr.f));
        by[r] = tr.y[src];
      }
      Tape tape;
      Tensor pred = net.forward(Tensor::from_vector({b, tr.f}, std::move(bx)));
      Tensor target = Tensor::from_vector({b, 1}, std::move(by));
      Tensor loss = mean(square(sub(pred, target)));
      if (!std::isfinite(loss.item()))
        throw std::runtime_error("fit_mlp: loss is not finite at node " +
                                 std::to_string(node));
      tape.backward(loss);
      opt.step();
    }
  }

  Tensor pred = net.forward(
      Tensor::from_vector({te.rows, te.f}, std::vector<double>(te.x)));
  double sse = 0.0;
  auto p = pred.data();
  for (std::size_t r = 0; r < te.rows; ++r) {
    double err = p[r] - te.y[r];
    sse += err * err;
  }
  return sse;
}

VariantFit mlp_variant(const CausalDataset& train, const CausalDataset& test,
                       const std::vector<std::vector<std::size_t>>& sets,
                       const PruneConfig& cfg) {
  std::size_t n = train.n_vars;
  VariantFit fit;
  std::vector<NodeDesign> tr(n), te(n);
  for (std::size_t i = 0; i < n; ++i) {
    tr[i] = build_design(train, i, sets[i], cfg.lag);
    te[i] = build_design(test, i, sets[i], cfg.lag);
    if (tr[i].rows == 0)
      throw std::invalid_argument("fit_mlp: training split has no full window");
    if (te[i].rows == 0)
      throw std::invalid_argument("fit_mlp: test split has no full window");
    fit.params += tr[i].f * cfg.hidden_width + 2 * cfg.hidden_width + 1;
    fit.test_rows += te[i].rows;
  }

  Rng master(cfg.seed);
  std::vector<double> sse(n, 0.0);
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run_node = [&](std::size_t i) {
    sse[i] = mlp_node(tr[i], te[i], cfg, master.stream("node", i), i);
  };
  if (cfg.jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_node(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          run_node(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(cfg.jobs, n); ++j)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (double s : sse) fit.sse += s;
  return fit;
}

}  // namespace

void PruneConfig::validate() const {
  if (lag < 1) throw std::invalid_argument("prune: lag must be >= 1");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw std::invalid_argument("prune: train_fraction must lie in (0, 1)");
  if (hidden_width < 1)
    throw std::invalid_argument("prune: hidden_width must be >= 1");
  if (epochs < 1) throw std::invalid_argument("prune: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("prune: learning_rate must be positive");
  if (batch_size < 1)
    throw std::invalid_argument("prune: batch_size must be >= 1");
}

std::vector<std::vector<std::size_t>> parent_sets(
    const GroundTruthGraph& graph) {
  std::size_t n = graph.n_vars;
  if (n == 0 || graph.adjacency.size() != n * n)
    throw std::invalid_argument("parent_sets: adjacency must be square");
  for (auto v : graph.adjacency)
    if (v > 1)
      throw std::invalid_argument("parent_sets: entries must be 0 or 1");
  std::vector<std::vector<std::size_t>> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (graph.adj(i, j)) sets[i].push_back(j);
    auto it = std::lower_bound(sets[i].begin(), sets[i].end(), i);
    if (it == sets[i].end() || *it != i) sets[i].insert(it, i);
  }
  return sets;
}

PruneRecord fit_ols(const CausalDataset& ds_train, const CausalDataset& ds_test,
                    const std::vector<std::vector<std::size_t>>& parents,
                    std::size_t lag) {
  check_dims(ds_train, ds_test, "fit_ols");
  if (lag < 1) throw std::invalid_argument("fit_ols: lag must be >= 1");
  validate_parents(parents, ds_train.n_vars, "fit_ols");
  VariantFit vanilla = ols_variant(ds_train, ds_test,
                                   full_sets(ds_train.n_vars), lag);
  VariantFit pruned = ols_variant(ds_train, ds_test, parents, lag);
  return make_record("ols", vanilla, pruned);
}

PruneRecord fit_mlp(const CausalDataset& ds_train, const CausalDataset& ds_test,
                    const std::vector<std::vector<std::size_t>>& parents,
                    const PruneConfig& cfg) {
  check_dims(ds_train, ds_test, "fit_mlp");
  cfg.validate();
  validate_parents(parents, ds_train.n_vars, "fit_mlp");
  VariantFit vanilla = mlp_variant(ds_train, ds_test,
                                   full_sets(ds_train.n_vars), cfg);
  VariantFit pruned = mlp_variant(ds_train, ds_test, parents, cfg);
  return make_record("mlp", vanilla, pruned);
}

PruneReport prune_report(const GroundTruthGraph& graph, const CausalDataset& ds,
                         const std::vector<std::string>& families,
                         const PruneConfig& cfg) {
  cfg.validate();
  if (graph.n_vars != ds.n_vars)
    throw std::invalid_argument("prune_report: graph is " +
                                std::to_string(graph.n_vars) +
                                "-dimensional, dataset has " +
                                std::to_string(ds.n_vars) + " variables");
  if (families.empty())
    throw std::invalid_argument("prune_report: no families requested");
  bool want_ols = false, want_mlp = false;
  for (const auto& f : families) {
    if (f == "ols")
      want_ols = true;
    else if (f == "mlp")
      want_mlp = true;
    else
      throw std::invalid_argument("prune_report: unknown family \"" + f +
                                  "\" (expected ols or mlp)");
  }

  auto sets = parent_sets(graph);
  SplitSpec spec;
  spec.calibration_fraction = cfg.train_fraction;
  auto [train_part, test_part] = split(ds, spec);
  if (cfg.standardize) {
    auto [std_train, stats] = standardize(train_part);
    train_part = std::move(std_train);
    test_part = apply_standardizer(stats, test_part);
  }

  PruneReport report;
  if (want_ols)
    report.records.push_back(fit_ols(train_part, test_part, sets, cfg.lag));
  if (want_mlp)
    report.records.push_back(fit_mlp(train_part, test_part, sets, cfg));
  return report;
}

std::string prune_report_json(const PruneReport& report) {
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const PruneRecord& r : report.records)
    j["records"].push_back({{"family", r.family},
                            {"vanilla_params", r.vanilla_params},
                            {"pruned_params", r.pruned_params},
                            {"pr_percent", r.pr_percent},
                            {"vanilla_mse", r.vanilla_mse},
                            {"pruned_mse", r.pruned_mse},
                            {"mse_r_percent", r.mse_r_percent}});
  return j.dump(2);
}

std::string format_prune_table(const PruneReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "family" << std::right << std::setw(15)
      << "vanilla_params" << std::setw(14) << "pruned_params" << std::setw(9)
      << "PR(%)" << std::setw(14) << "vanilla_mse" << std::setw(13)
      << "pruned_mse" << std::setw(11) << "MSE-R(%)" << '\n';
  out << std::fixed;
  for (const PruneRecord& r : report.records) {
    out << std::left << std::setw(8) << r.family << std::right << std::setw(15)
        << r.vanilla_params << std::setw(14) << r.pruned_params
        << std::setprecision(2) << std::setw(9) << r.pr_percent
        << std::setprecision(6) << std::setw(14) << r.vanilla_mse
        << std::setw(13) << r.pruned_mse << std::setprecision(2)
        << std::showpos << std::setw(11) << r.mse_r_percent << std::noshowpos
        << '\n';
  }
  return out.str();
}

}  // namespace granger
