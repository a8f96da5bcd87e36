#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "granger/rng.hpp"
#include "granger/tensor.hpp"

namespace granger {

enum class Objective { kMse, kNll };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);

// Architecture and loss settings for the adjacency-gated forecaster.
struct ModelConfig {
  std::size_t n_vars = 0;
  std::size_t lag = 0;
  std::size_t d_model = 0;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ffn_width = 0;  // 0 means 4 * d_model
  double dropout_rate = 0.1;
  double diag_force = 100.0;
  double mask_eps = 1e-6;
  Objective objective = Objective::kMse;
  bool layerwise_masks = false;
  bool decoupled_heads = false;
  bool residual_target = false;

  std::size_t ffn() const { return ffn_width ? ffn_width : 4 * d_model; }
  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t mask_count() const { return layerwise_masks ? n_layers : 1; }
  std::size_t head_count() const { return decoupled_heads ? n_vars : 1; }

  // Throws std::invalid_argument on a bad combination.
  void validate() const;
};

struct LayerParams {
  Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct HeadParams {
  Tensor w_mu, b_mu;
  Tensor w_sigma, b_sigma;  // nll objective only
};

struct ModelParams {
  Tensor w_emb;  // d x L, shared across variables
  Tensor b_emb;  // d
  Tensor e_id;   // N x d
  std::vector<Tensor> theta;  // one N x N logit matrix, or one per layer
  std::vector<LayerParams> layers;
  std::vector<HeadParams> heads;  // one shared head, or one per variable

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  // Stable (name, array) enumeration; drives optimizer state and checkpoints.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::size_t count_values() const;
};

// Continuous edge-score matrix; scores[i][j] gates j -> i attention.
struct AdjacencyEstimate {
  Tensor scores;                    // N x N, reported graph
  std::vector<Tensor> layer_scores; // per-layer masks when layerwise_masks
  const Tensor& mask_for_layer(std::size_t m) const {
    return layer_scores.empty() ? scores : layer_scores[m];
  }
};

struct Prediction {
  Tensor mu;   // B x N
  Tensor var;  // B x N, nll only
  bool has_var = false;
};

// History windows to tokens: Dropout(W_emb x + b_emb) + E_id row.
Tensor embed(const Tensor& inputs, const ModelParams& p, const ModelConfig& cfg,
             bool training, Rng& rng);

// Sigmoid of the edge logits with the diagonal forced by diag_force.
AdjacencyEstimate adjacency(const ModelParams& p, const ModelConfig& cfg);

// One multi-head attention sublayer whose logits carry log(A + eps).
Tensor masked_attention(const Tensor& tokens, const Tensor& a_hat,
                        const LayerParams& lp, const ModelConfig& cfg);

// Stack of post-norm encoder blocks; attention is the only cross-variable path.
Tensor encoder_forward(const Tensor& tokens, const ModelParams& p,
                       const ModelConfig& cfg, const AdjacencyEstimate& a);

// Linear mean head, plus a softplus variance head under nll.
Prediction predict(const Tensor& latent, const ModelParams& p,
                   const ModelConfig& cfg, const Tensor& inputs);

// Prediction term averaged over all targets plus the off-diagonal
// sparsity penalty scaled by lambda.
Tensor loss_joint(const Prediction& pred, const Tensor& targets,
                  const AdjacencyEstimate& a, double lambda,
                  const ModelConfig& cfg);

// embed -> encoder -> heads in one call.
Prediction model_forward(const Tensor& inputs, const ModelParams& p,
                         const ModelConfig& cfg, const AdjacencyEstimate& a,
                         bool training, Rng& rng);

void save_checkpoint(const ModelConfig& cfg, const ModelParams& p,
                     const std::string& path);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace granger
