#include "granger/dataio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "granger/csv.hpp"
#include "granger/rng.hpp"

namespace granger {

namespace {

namespace fs = std::filesystem;

void load_meta_sidecar(CausalDataset& ds, const std::string& data_path) {
  std::string side = data_path;
  if (side.size() > 4 && side.ends_with(".csv"))
    side = side.substr(0, side.size() - 4) + ".meta.json";
  else
    side += ".meta.json";
  std::ifstream in(side);
  if (!in) return;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return;
  }
  if (j.contains("generator")) ds.meta.generator = j["generator"];
  if (j.contains("seed")) ds.meta.seed = j["seed"];
  if (j.contains("params"))
    for (auto& [k, v] : j["params"].items())
      ds.meta.params.emplace_back(k, v.get<double>());
}

void append_table(CausalDataset& ds, const CsvTable& t,
                  const std::string& path) {
  if (ds.n_vars == 0) {
    ds.n_vars = t.cols;
  } else if (t.cols != ds.n_vars) {
    throw std::runtime_error(path + ": expected " + std::to_string(ds.n_vars) +
                             " columns, got " + std::to_string(t.cols));
  }
  if (ds.t_len > 0) ds.trajectory_starts.push_back(ds.t_len);
  ds.data.insert(ds.data.end(), t.values.begin(), t.values.end());
  ds.t_len += t.rows;
}

}  // namespace

CausalDataset load_dataset(const std::string& data_path,
                           const std::string& truth_path) {
  CausalDataset ds;
  if (fs::is_directory(data_path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(data_path))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    if (files.empty())
      throw std::runtime_error(data_path + ": no .csv files found");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) append_table(ds, read_numeric_csv(f), f);
  } else {
    append_table(ds, read_numeric_csv(data_path), data_path);
    load_meta_sidecar(ds, data_path);
  }
  if (!truth_path.empty()) {
    CsvTable t = read_numeric_csv(truth_path);
    if (t.rows != ds.n_vars || t.cols != ds.n_vars)
      throw std::runtime_error(
          truth_path + ": truth is " + std::to_string(t.rows) + "x" +
          std::to_string(t.cols) + " but data has " +
          std::to_string(ds.n_vars) + " variables");
    GroundTruthGraph g;
    g.n_vars = ds.n_vars;
    g.adjacency.resize(t.values.size());
    for (std::size_t e = 0; e < t.values.size(); ++e) {
      double v = t.values[e];
      if (v != 0.0 && v != 1.0)
        throw std::runtime_error(truth_path + ": adjacency entries must be 0/1");
      g.adjacency[e] = static_cast<std::uint8_t>(v);
    }
    ds.truth = std::move(g);
  }
  return ds;
}

Standardizer compute_standardizer(const CausalDataset& ds) {
  if (ds.t_len == 0) throw std::invalid_argument("standardize: empty dataset");
  Standardizer s;
  s.mean.assign(ds.n_vars, 0.0);
  s.stddev.assign(ds.n_vars, 0.0);
  for (std::size_t t = 0; t < ds.t_len; ++t)
    for (std::size_t i = 0; i < ds.n_vars; ++i) s.mean[i] += ds.value(t, i);
  for (double& m : s.mean) m /= static_cast<double>(ds.t_len);
  for (std::size_t t = 0; t < ds.t_len; ++t)
    for (std::size_t i = 0; i < ds.n_vars; ++i) {
      double d = ds.value(t, i) - s.mean[i];
      s.stddev[i] += d * d;
    }
  for (std::size_t i = 0; i < ds.n_vars; ++i) {
    s.stddev[i] = std::sqrt(s.stddev[i] / static_cast<double>(ds.t_len));
    if (s.stddev[i] < 1e-12)
      throw std::runtime_error("standardize: variable " + std::to_string(i) +
                               " is constant");
  }
  return s;
}

CausalDataset apply_standardizer(const Standardizer& s,
                                 const CausalDataset& ds) {
  CausalDataset out = ds;
  for (std::size_t t = 0; t < out.t_len; ++t)
    for (std::size_t i = 0; i < out.n_vars; ++i)
      out.value(t, i) = (ds.value(t, i) - s.mean[i]) / s.stddev[i];
  return out;
}

CausalDataset invert_standardizer(const Standardizer& s,
                                  const CausalDataset& ds) {
  CausalDataset out = ds;
  for (std::size_t t = 0; t < out.t_len; ++t)
    for (std::size_t i = 0; i < out.n_vars; ++i)
      out.value(t, i) = ds.value(t, i) * s.stddev[i] + s.mean[i];
  return out;
}

std::pair<CausalDataset, Standardizer> standardize(const CausalDataset& ds) {
  Standardizer s = compute_standardizer(ds);
  return {apply_standardizer(s, ds), s};
}

std::vector<WindowBatch> make_windows(const CausalDataset& ds,
                                      std::size_t lag, std::size_t batch_size,
                                      std::uint64_t shuffle_seed) {
  if (lag < 1) throw std::invalid_argument("make_windows: lag must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("make_windows: batch_size must be >= 1");
  std::vector<std::size_t> targets;
  for (std::size_t k = 0; k < ds.n_trajectories(); ++k) {
    std::size_t begin = ds.trajectory_begin(k), end = ds.trajectory_end(k);
    if (end - begin < lag + 1)
      throw std::invalid_argument(
          "make_windows: trajectory " + std::to_string(k) + " has " +
          std::to_string(end - begin) + " rows, need at least lag+1 = " +
          std::to_string(lag + 1));
    for (std::size_t t = begin + lag; t < end; ++t) targets.push_back(t);
  }
  Rng rng(shuffle_seed);
  rng.shuffle(targets);

  const std::size_t n = ds.n_vars;
  std::vector<WindowBatch> batches;
  for (std::size_t pos = 0; pos < targets.size(); pos += batch_size) {
    std::size_t b = std::min(batch_size, targets.size() - pos);
    std::vector<double> in(b * n * lag), tg(b * n);
    WindowBatch wb;
    wb.t_indices.assign(targets.begin() + pos, targets.begin() + pos + b);
    for (std::size_t s = 0; s < b; ++s) {
      std::size_t t = wb.t_indices[s];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < lag; ++l)
          in[(s * n + i) * lag + l] = ds.value(t - lag + l, i);
        tg[s * n + i] = ds.value(t, i);
      }
    }
    wb.inputs = Tensor::from_vector({b, n, lag}, std::move(in));
    wb.targets = Tensor::from_vector({b, n}, std::move(tg));
    batches.push_back(std::move(wb));
  }
  return batches;
}

std::pair<CausalDataset, CausalDataset> split(const CausalDataset& ds,
                                              const SplitSpec& spec) {
  if (spec.calibration_fraction <= 0.0 || spec.calibration_fraction >= 1.0)
    throw std::invalid_argument("split: fraction must lie in (0,1)");
  CausalDataset cal, test;
  cal.n_vars = test.n_vars = ds.n_vars;
  cal.truth = test.truth = ds.truth;
  cal.meta = test.meta = ds.meta;
  cal.trajectory_starts.clear();
  test.trajectory_starts.clear();
  auto push_rows = [&](CausalDataset& part, std::size_t begin,
                       std::size_t end) {
    if (begin >= end) return;
    part.trajectory_starts.push_back(part.t_len);
    part.data.insert(part.data.end(), ds.data.begin() + begin * ds.n_vars,
                     ds.data.begin() + end * ds.n_vars);
    part.t_len += end - begin;
  };
  if (spec.mode == SplitSpec::Mode::kChronological) {
    for (std::size_t k = 0; k < ds.n_trajectories(); ++k) {
      std::size_t begin = ds.trajectory_begin(k), end = ds.trajectory_end(k);
      auto cut = static_cast<std::size_t>(
          std::floor(spec.calibration_fraction * double(end - begin)));
      push_rows(cal, begin, begin + cut);
      push_rows(test, begin + cut, end);
    }
  } else {
    std::vector<std::size_t> order(ds.n_trajectories());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(spec.seed);
    rng.shuffle(order);
    std::size_t want =
        static_cast<std::size_t>(std::floor(spec.calibration_fraction *
                                            double(ds.t_len)));
    std::size_t got = 0;
    for (std::size_t k : order) {
      std::size_t begin = ds.trajectory_begin(k), end = ds.trajectory_end(k);
      if (got < want) {
        push_rows(cal, begin, end);
        got += end - begin;
      } else {
        push_rows(test, begin, end);
      }
    }
  }
  if (cal.t_len == 0 || test.t_len == 0)
    throw std::invalid_argument("split: a part would be empty");
  if (cal.trajectory_starts.empty()) cal.trajectory_starts = {0};
  if (test.trajectory_starts.empty()) test.trajectory_starts = {0};
  return {std::move(cal), std::move(test)};
}

}  // namespace granger
