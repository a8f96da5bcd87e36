#include <benchmark/benchmark.h>

#include <vector>

#include "granger/datagen.hpp"
#include "granger/dataio.hpp"
#include "granger/eval.hpp"
#include "granger/model.hpp"
#include "granger/rng.hpp"
#include "granger/tensor.hpp"
#include "granger/train.hpp"

namespace {

granger::ModelConfig reference_config() {
  granger::ModelConfig cfg;
  cfg.n_vars = 10;
  cfg.lag = 5;
  cfg.d_model = 64;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  return cfg;
}

granger::Tensor random_inputs(std::size_t batch, std::size_t n,
                              std::size_t lag, granger::Rng& rng) {
  std::vector<double> v(batch * n * lag);
  for (double& x : v) x = rng.normal();
  return granger::Tensor::from_vector({batch, n, lag}, v);
}

void bm_model_forward(benchmark::State& state) {
  granger::ModelConfig cfg = reference_config();
  granger::Rng rng(1);
  granger::ModelParams p = granger::ModelParams::init(cfg, rng);
  granger::AdjacencyEstimate a = granger::adjacency(p, cfg);
  granger::Tensor inputs = random_inputs(32, cfg.n_vars, cfg.lag, rng);
  for (auto _ : state) {
    granger::Prediction pred =
        granger::model_forward(inputs, p, cfg, a, false, rng);
    benchmark::DoNotOptimize(pred.mu.data().data());
  }
}
BENCHMARK(bm_model_forward);

void bm_train_step(benchmark::State& state) {
  granger::ModelConfig cfg = reference_config();
  granger::Rng rng(1);
  granger::ModelParams p = granger::ModelParams::init(cfg, rng);
  granger::RunConfig rc;
  rc.model = cfg;
  std::vector<granger::Tensor> trainable;
  for (auto& [name, t] : p.named()) trainable.push_back(t);
  granger::Optimizer opt(trainable, rc);
  granger::Tensor inputs = random_inputs(32, cfg.n_vars, cfg.lag, rng);
  granger::Tensor targets = random_inputs(32, cfg.n_vars, 1, rng);
  targets = granger::reshape(targets, {32, cfg.n_vars});
  for (auto _ : state) {
    granger::Tape tape;
    granger::AdjacencyEstimate a = granger::adjacency(p, cfg);
    granger::Prediction pred =
        granger::model_forward(inputs, p, cfg, a, true, rng);
    granger::Tensor loss =
        granger::loss_joint(pred, targets, a, 0.01, cfg);
    tape.backward(loss);
    opt.step();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(bm_train_step);

void bm_matmul(benchmark::State& state) {
  granger::Rng rng(4);
  granger::Tensor a = random_inputs(32, 64, 64, rng);
  granger::Tensor b = random_inputs(32, 64, 64, rng);
  for (auto _ : state) {
    granger::Tensor c = granger::matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(bm_matmul);

void bm_gen_var(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    granger::CausalDataset ds = granger::gen_var(10, 500, 3, seed++);
    benchmark::DoNotOptimize(ds.data.data());
  }
}
BENCHMARK(bm_gen_var);

void bm_gen_lorenz96(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    granger::CausalDataset ds = granger::gen_lorenz96(10, 10.0, 250, seed++);
    benchmark::DoNotOptimize(ds.data.data());
  }
}
BENCHMARK(bm_gen_lorenz96);

void bm_make_windows(benchmark::State& state) {
  granger::CausalDataset ds = granger::gen_var(10, 500, 3, 1);
  for (auto _ : state) {
    auto batches = granger::make_windows(ds, 5, 32, 7);
    benchmark::DoNotOptimize(batches.data());
  }
}
BENCHMARK(bm_make_windows);

void bm_auroc(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  granger::Rng rng(2);
  std::vector<double> scores(n * n);
  for (double& s : scores) s = rng.uniform();
  granger::GroundTruthGraph truth;
  truth.n_vars = n;
  truth.adjacency.resize(n * n);
  for (auto& cell : truth.adjacency) cell = rng.uniform() < 0.05 ? 1 : 0;
  for (auto _ : state) {
    double v = granger::auroc(scores, truth,
                              granger::DiagonalPolicy::kExclude);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(bm_auroc)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
