#include "granger/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "granger/csv.hpp"
#include "granger/eval.hpp"

namespace granger {

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string sweep_mode_name(SweepMode m) {
  return m == SweepMode::kOneAtATime ? "one-at-a-time" : "cartesian";
}

SweepMode sweep_mode_from_name(const std::string& name) {
  if (name == "one-at-a-time") return SweepMode::kOneAtATime;
  if (name == "cartesian") return SweepMode::kCartesian;
  throw std::invalid_argument("unknown sweep mode '" + name + "'");
}

void RunConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1)
    throw std::invalid_argument("batch_size must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0))
    throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (!(eps_opt > 0.0))
    throw std::invalid_argument("eps_opt must be positive");
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct TomlValue {
  std::string text;  // unquoted content for strings, raw token otherwise
  bool quoted = false;
};

TomlValue parse_value(const std::string& rhs, const std::string& ctx) {
  if (rhs.empty()) throw std::invalid_argument(ctx + ": missing value");
  TomlValue v;
  if (rhs.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < rhs.size(); ++i) {
      char c = rhs[i];
      if (c == '"') break;
      if (c == '\\') {
        if (i + 1 >= rhs.size())
          throw std::invalid_argument(ctx + ": dangling escape");
        char e = rhs[++i];
        if (e != '"' && e != '\\')
          throw std::invalid_argument(ctx + ": unsupported escape \\" + e);
        c = e;
      }
      out.push_back(c);
    }
    if (i >= rhs.size())
      throw std::invalid_argument(ctx + ": unterminated string");
    std::string rest = trimmed(rhs.substr(i + 1));
    if (!rest.empty() && rest.front() != '#')
      throw std::invalid_argument(ctx + ": trailing characters after string");
    v.text = std::move(out);
    v.quoted = true;
    return v;
  }
  std::size_t hash = rhs.find('#');
  std::string tok = trimmed(hash == std::string::npos ? rhs : rhs.substr(0, hash));
  if (tok.empty()) throw std::invalid_argument(ctx + ": missing value");
  if (tok.find_first_of(" \t") != std::string::npos)
    throw std::invalid_argument(ctx + ": unexpected space in value '" + tok +
                                "'");
  v.text = std::move(tok);
  return v;
}

void apply_config_key(RunConfig& cfg, const std::string& section,
                      const std::string& key, const TomlValue& v) {
  auto where = [&] { return section + "." + key; };
  auto number = [&]() -> double {
    double d{};
    const char* end = v.text.data() + v.text.size();
    auto [p, ec] = std::from_chars(v.text.data(), end, d);
    if (v.quoted || ec != std::errc{} || p != end)
      throw std::invalid_argument(where() + " expects a number, got '" +
                                  v.text + "'");
    return d;
  };
  auto count = [&]() -> std::uint64_t {
    std::uint64_t u{};
    const char* end = v.text.data() + v.text.size();
    auto [p, ec] = std::from_chars(v.text.data(), end, u);
    if (v.quoted || ec != std::errc{} || p != end)
      throw std::invalid_argument(where() +
                                  " expects a nonnegative integer, got '" +
                                  v.text + "'");
    return u;
  };
  auto boolean = [&]() -> bool {
    if (!v.quoted && v.text == "true") return true;
    if (!v.quoted && v.text == "false") return false;
    throw std::invalid_argument(where() + " expects true or false, got '" +
                                v.text + "'");
  };

  if (section == "model") {
    ModelConfig& m = cfg.model;
    if (key == "n_vars") m.n_vars = count();
    else if (key == "lag") m.lag = count();
    else if (key == "d_model") m.d_model = count();
    else if (key == "n_layers") m.n_layers = count();
    else if (key == "n_heads") m.n_heads = count();
    else if (key == "ffn_width") m.ffn_width = count();
    else if (key == "dropout_rate") m.dropout_rate = number();
    else if (key == "diag_force") m.diag_force = number();
    else if (key == "mask_eps") m.mask_eps = number();
    else if (key == "objective") m.objective = objective_from_name(v.text);
    else if (key == "layerwise_masks") m.layerwise_masks = boolean();
    else if (key == "decoupled_heads") m.decoupled_heads = boolean();
    else if (key == "residual_target") m.residual_target = boolean();
    else throw std::invalid_argument("unknown key " + where());
  } else if (section == "optimizer") {
    if (key == "optimizer") cfg.optimizer = optimizer_from_name(v.text);
    else if (key == "learning_rate") cfg.learning_rate = number();
    else if (key == "beta1") cfg.beta1 = number();
    else if (key == "beta2") cfg.beta2 = number();
    else if (key == "eps_opt") cfg.eps_opt = number();
    else if (key == "batch_size") cfg.batch_size = count();
    else if (key == "epochs") cfg.epochs = count();
    else if (key == "lambda") cfg.lambda = number();
    else if (key == "seed") cfg.seed = count();
    else throw std::invalid_argument("unknown key " + where());
  } else if (section == "data") {
    if (key == "dataset") cfg.dataset = v.text;
    else if (key == "truth") cfg.truth = v.text;
    else if (key == "standardize") cfg.standardize = boolean();
    else throw std::invalid_argument("unknown key " + where());
  } else {
    throw std::invalid_argument("unknown section [" + section + "]");
  }
}

std::string fmt_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string quoted_str(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string ctx = "run config line " + std::to_string(lineno);
    std::string s = trimmed(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw std::invalid_argument(ctx + ": unterminated section header");
      section = trimmed(s.substr(1, s.size() - 2));
      if (section != "model" && section != "optimizer" && section != "data")
        throw std::invalid_argument(ctx + ": unknown section [" + section +
                                    "]");
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(ctx + ": expected key = value");
    std::string key = trimmed(s.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(ctx + ": empty key");
    if (section.empty())
      throw std::invalid_argument(ctx + ": key '" + key +
                                  "' outside any section");
    TomlValue v = parse_value(trimmed(s.substr(eq + 1)), ctx);
    try {
      apply_config_key(cfg, section, key, v);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(ctx + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string format_run_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  std::ostringstream os;
  os << "[model]\n"
     << "n_vars = " << m.n_vars << '\n'
     << "lag = " << m.lag << '\n'
     << "d_model = " << m.d_model << '\n'
     << "n_layers = " << m.n_layers << '\n'
     << "n_heads = " << m.n_heads << '\n'
     << "ffn_width = " << m.ffn_width << '\n'
     << "dropout_rate = " << fmt_double(m.dropout_rate) << '\n'
     << "diag_force = " << fmt_double(m.diag_force) << '\n'
     << "mask_eps = " << fmt_double(m.mask_eps) << '\n'
     << "objective = " << quoted_str(objective_name(m.objective)) << '\n'
     << "layerwise_masks = " << (m.layerwise_masks ? "true" : "false") << '\n'
     << "decoupled_heads = " << (m.decoupled_heads ? "true" : "false") << '\n'
     << "residual_target = " << (m.residual_target ? "true" : "false") << '\n'
     << "\n[optimizer]\n"
     << "optimizer = " << quoted_str(optimizer_name(cfg.optimizer)) << '\n'
     << "learning_rate = " << fmt_double(cfg.learning_rate) << '\n'
     << "beta1 = " << fmt_double(cfg.beta1) << '\n'
     << "beta2 = " << fmt_double(cfg.beta2) << '\n'
     << "eps_opt = " << fmt_double(cfg.eps_opt) << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "lambda = " << fmt_double(cfg.lambda) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "\n[data]\n"
     << "dataset = " << quoted_str(cfg.dataset) << '\n'
     << "truth = " << quoted_str(cfg.truth) << '\n'
     << "standardize = " << (cfg.standardize ? "true" : "false") << '\n';
  return os.str();
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override '" + assignment +
                                "' is not of the form section.key=value");
  std::string lhs = trimmed(assignment.substr(0, eq));
  std::string rhs = trimmed(assignment.substr(eq + 1));
  std::size_t dot = lhs.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= lhs.size())
    throw std::invalid_argument("override key '" + lhs +
                                "' is not of the form section.key");
  TomlValue v = parse_value(rhs, "override '" + assignment + "'");
  apply_config_key(cfg, lhs.substr(0, dot), lhs.substr(dot + 1), v);
}

Optimizer::Optimizer(std::vector<Tensor> params, const RunConfig& cfg)
    : params_(std::move(params)),
      kind_(cfg.optimizer),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps_opt) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].size(), 0.0);
    v_[i].assign(params_[i].size(), 0.0);
  }
}

void Optimizer::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].data();
    auto g = params_[i].grad();
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr_ * g[j];
    } else {
      std::vector<double>& m = m_[i];
      std::vector<double>& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
        w[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
      }
    }
    params_[i].zero_grad();
  }
}

namespace {

struct LossTerms {
  double prediction = 0.0;
  double sparsity = 0.0;
};

// Plain scan mirroring loss_joint, used for reports and abort diagnostics.
LossTerms raw_terms(const Prediction& pred, const Tensor& targets,
                    const AdjacencyEstimate& a, double lambda,
                    const ModelConfig& cfg) {
  LossTerms t;
  auto mu = pred.mu.data();
  auto y = targets.data();
  double acc = 0.0;
  if (cfg.objective == Objective::kMse) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      double d = y[i] - mu[i];
      acc += d * d;
    }
  } else {
    auto var = pred.var.data();
    for (std::size_t i = 0; i < mu.size(); ++i) {
      double d = y[i] - mu[i];
      acc += 0.5 * std::log(var[i]) + d * d / (2.0 * var[i]);
    }
  }
  t.prediction = acc / static_cast<double>(mu.size());
  std::size_t n = cfg.n_vars;
  if (lambda > 0.0 && n >= 2) {
    auto s = a.scores.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) sum += s[i * n + j];
    t.sparsity = sum * (lambda / static_cast<double>(n * (n - 1)));
  }
  return t;
}

std::string step_failure(const char* what, std::size_t step, std::size_t epoch,
                         std::size_t batch,
                         const std::optional<LossTerms>& terms) {
  std::ostringstream os;
  os << "training aborted at step " << step << " (epoch " << epoch
     << ", batch " << batch << "): " << what;
  if (terms)
    os << "; prediction=" << terms->prediction
       << " sparsity=" << terms->sparsity;
  return os.str();
}

TrainReport run_training(const CausalDataset& raw, const RunConfig& cfg_in,
                         const std::string& checkpoint_path,
                         const GroundTruthGraph* frozen) {
  RunConfig cfg = cfg_in;
  if (cfg.model.n_vars == 0) cfg.model.n_vars = raw.n_vars;
  if (cfg.model.n_vars != raw.n_vars)
    throw std::invalid_argument(
        "train: config expects " + std::to_string(cfg.model.n_vars) +
        " variables, dataset has " + std::to_string(raw.n_vars));
  if (frozen) {
    if (frozen->n_vars != cfg.model.n_vars)
      throw std::invalid_argument(
          "fixed_mask_train: mask is " + std::to_string(frozen->n_vars) +
          "-dimensional, dataset has " + std::to_string(raw.n_vars) +
          " variables");
    cfg.model.diag_force = 0.0;
  }
  cfg.validate();
  cfg.model.validate();

  auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.model_config = cfg.model;

  CausalDataset ds;
  if (cfg.standardize) {
    auto fitted = standardize(raw);
    ds = std::move(fitted.first);
    report.standardizer = std::move(fitted.second);
    report.standardized = true;
  } else {
    ds = raw;
  }

  Rng master(cfg.seed);
  Rng init_rng = master.stream("init");
  Rng dropout_rng = master.stream("dropout");
  ModelParams params = ModelParams::init(cfg.model, init_rng);
  if (frozen) {
    std::size_t n = cfg.model.n_vars;
    for (Tensor& th : params.theta) {
      auto d = th.data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          d[i * n + j] = frozen->adj(i, j) ? 100.0 : -100.0;
      th.set_requires_grad(false);
    }
  }

  std::vector<Tensor> trainable;
  for (auto& [name, tensor] : params.named())
    if (tensor.requires_grad()) trainable.push_back(tensor);
  Optimizer opt(std::move(trainable), cfg);

  std::size_t global_step = 0;
  report.epochs.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = make_windows(ds, cfg.model.lag, cfg.batch_size,
                                master.stream("shuffle", epoch).seed());
    double pred_sum = 0.0, sp_sum = 0.0, tot_sum = 0.0;
    std::size_t samples = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const WindowBatch& batch = batches[b];
      std::size_t bsz = batch.targets.shape()[0];
      Tape tape;
      std::optional<Prediction> pred;
      AdjacencyEstimate a;
      Tensor total;
      try {
        a = adjacency(params, cfg.model);
        pred = model_forward(batch.inputs, params, cfg.model, a,
                             /*training=*/true, dropout_rng);
        total = loss_joint(*pred, batch.targets, a, cfg.lambda, cfg.model);
      } catch (const DomainError& e) {
        std::optional<LossTerms> terms;
        if (pred)
          terms = raw_terms(*pred, batch.targets, a, cfg.lambda, cfg.model);
        throw TrainError(step_failure(e.what(), global_step, epoch, b, terms),
                         global_step);
      }
      LossTerms terms =
          raw_terms(*pred, batch.targets, a, cfg.lambda, cfg.model);
      tape.backward(total);
      opt.step();
      pred_sum += terms.prediction * static_cast<double>(bsz);
      sp_sum += terms.sparsity * static_cast<double>(bsz);
      tot_sum += total.item() * static_cast<double>(bsz);
      samples += bsz;
      ++global_step;
    }
    report.epochs.push_back({pred_sum / static_cast<double>(samples),
                             sp_sum / static_cast<double>(samples),
                             tot_sum / static_cast<double>(samples)});
  }

  AdjacencyEstimate fin = adjacency(params, cfg.model);
  report.adjacency.scores = fin.scores.detach_copy();
  report.adjacency.layer_scores.reserve(fin.layer_scores.size());
  for (const Tensor& t : fin.layer_scores)
    report.adjacency.layer_scores.push_back(t.detach_copy());
  report.params = params;
  if (!checkpoint_path.empty()) {
    save_checkpoint(cfg.model, params, checkpoint_path);
    report.checkpoint_path = checkpoint_path;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

double mean_eval(const CausalDataset& ds, const ModelParams& p,
                 const ModelConfig& cfg, bool force_mse) {
  AdjacencyEstimate a = adjacency(p, cfg);
  auto batches = make_windows(ds, cfg.lag, 256, 0);
  Rng rng(0);
  double acc = 0.0;
  std::size_t count = 0;
  for (const WindowBatch& b : batches) {
    Prediction pred = model_forward(b.inputs, p, cfg, a, false, rng);
    auto mu = pred.mu.data();
    auto y = b.targets.data();
    if (force_mse || cfg.objective == Objective::kMse) {
      for (std::size_t i = 0; i < mu.size(); ++i) {
        double d = y[i] - mu[i];
        acc += d * d;
      }
    } else {
      auto var = pred.var.data();
      for (std::size_t i = 0; i < mu.size(); ++i) {
        double d = y[i] - mu[i];
        acc += 0.5 * std::log(var[i]) + d * d / (2.0 * var[i]);
      }
    }
    count += mu.size();
  }
  return acc / static_cast<double>(count);
}

}  // namespace

TrainReport train(const CausalDataset& ds, const RunConfig& cfg,
                  const std::string& checkpoint_path) {
  return run_training(ds, cfg, checkpoint_path, nullptr);
}

TrainReport fixed_mask_train(const CausalDataset& ds, const RunConfig& cfg,
                             const GroundTruthGraph& frozen_mask,
                             const std::string& checkpoint_path) {
  return run_training(ds, cfg, checkpoint_path, &frozen_mask);
}

double evaluate_loss(const CausalDataset& ds, const ModelParams& p,
                     const ModelConfig& cfg) {
  return mean_eval(ds, p, cfg, false);
}

double evaluate_mse(const CausalDataset& ds, const ModelParams& p,
                    const ModelConfig& cfg) {
  return mean_eval(ds, p, cfg, true);
}

std::vector<SweepCell> hyperparam_sweep(
    const CausalDataset& ds, const RunConfig& base_cfg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
    SweepMode mode, double train_fraction, std::size_t jobs) {
  if (grid.empty()) throw std::invalid_argument("hyperparam_sweep: empty grid");
  for (const auto& [key, values] : grid)
    if (values.empty())
      throw std::invalid_argument("hyperparam_sweep: no values for " + key);
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument(
        "hyperparam_sweep: train_fraction must lie in (0, 1)");

  std::vector<SweepCell> cells;
  if (mode == SweepMode::kOneAtATime) {
    for (const auto& [key, values] : grid)
      for (const std::string& value : values) {
        SweepCell c;
        c.assignment = {{key, value}};
        cells.push_back(std::move(c));
      }
  } else {
    std::vector<std::size_t> idx(grid.size(), 0);
    bool more = true;
    while (more) {
      SweepCell c;
      for (std::size_t g = 0; g < grid.size(); ++g)
        c.assignment.emplace_back(grid[g].first, grid[g].second[idx[g]]);
      cells.push_back(std::move(c));
      more = false;
      for (std::size_t g = grid.size(); g-- > 0;) {
        if (++idx[g] < grid[g].second.size()) {
          more = true;
          break;
        }
        idx[g] = 0;
      }
    }
  }

  SplitSpec spec;
  spec.calibration_fraction = train_fraction;
  spec.mode = SplitSpec::Mode::kChronological;
  auto parts = split(ds, spec);
  const CausalDataset& fit_part = parts.first;
  const CausalDataset& holdout = parts.second;

  auto run_cell = [&](SweepCell& cell) {
    try {
      RunConfig cfg = base_cfg;
      for (const auto& [key, value] : cell.assignment)
        apply_override(cfg, key + "=" + value);
      cell.config = cfg;
      TrainReport rep = train(fit_part, cfg);
      CausalDataset val = rep.standardized
                              ? apply_standardizer(rep.standardizer, holdout)
                              : holdout;
      cell.validation_loss = evaluate_loss(val, rep.params, rep.model_config);
      if (ds.truth) {
        try {
          cell.auroc = auroc(rep.adjacency.scores.data(), *ds.truth,
                             DiagonalPolicy::kExclude);
        } catch (const std::invalid_argument&) {
          // degenerate truth, e.g. no off-diagonal edges: leave auroc unset
        }
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  if (jobs <= 1 || cells.size() <= 1) {
    for (SweepCell& c : cells) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::size_t workers = std::min(jobs, cells.size());
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          run_cell(cells[i]);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  auto sort_key = [](const SweepCell& c) {
    return c.ok() && std::isfinite(c.validation_loss)
               ? c.validation_loss
               : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(cells.begin(), cells.end(),
                   [&](const SweepCell& x, const SweepCell& y) {
                     return sort_key(x) < sort_key(y);
                   });
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& table,
                     const std::string& path) {
  auto csv_cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
    return out;
  };
  std::vector<std::string> cells;
  for (const SweepCell& c : table) {
    std::string assignment;
    for (const auto& [key, value] : c.assignment) {
      if (!assignment.empty()) assignment.push_back(';');
      assignment += key + "=" + value;
    }
    cells.push_back(csv_cell(assignment));
    cells.push_back(c.ok() ? fmt_double(c.validation_loss) : "");
    cells.push_back(c.auroc ? fmt_double(*c.auroc) : "");
    cells.push_back(csv_cell(c.error));
  }
  write_string_csv(path, {"assignment", "validation_loss", "auroc", "error"},
                   cells, table.size(), 4);
}

}  // namespace granger
