#include "granger/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace granger {

namespace {

using nlohmann::json;

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-lim, lim);
  return t;
}

Tensor diag_matrix(std::size_t n, double v) {
  Tensor t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = v;
  return t;
}

Tensor off_diagonal_ones(std::size_t n) {
  Tensor t = Tensor::full({n, n}, 1.0);
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 0.0;
  return t;
}

void require_finite(const Tensor& term, const char* label) {
  if (!std::isfinite(term.item()))
    throw DomainError(std::string(label) + " is not finite");
}

}  // namespace

std::string objective_name(Objective o) {
  return o == Objective::kMse ? "mse" : "nll";
}

Objective objective_from_name(const std::string& name) {
  if (name == "mse") return Objective::kMse;
  if (name == "nll") return Objective::kNll;
  throw std::invalid_argument("unknown objective '" + name +
                              "', expected mse or nll");
}

void ModelConfig::validate() const {
  if (n_vars < 1) throw std::invalid_argument("n_vars must be at least 1");
  if (lag < 1) throw std::invalid_argument("lag must be at least 1");
  if (d_model < 1) throw std::invalid_argument("d_model must be at least 1");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be at least 1");
  if (n_heads < 1) throw std::invalid_argument("n_heads must be at least 1");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  if (!(mask_eps > 0.0))
    throw std::invalid_argument("mask_eps must be positive");
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  std::size_t n = cfg.n_vars, l = cfg.lag, d = cfg.d_model, f = cfg.ffn();
  ModelParams p;
  p.w_emb = xavier({d, l}, l, d, rng);
  p.b_emb = Tensor::zeros({d}, true);
  p.e_id = xavier({n, d}, n, d, rng);
  for (std::size_t m = 0; m < cfg.mask_count(); ++m)
    p.theta.push_back(Tensor::zeros({n, n}, true));
  for (std::size_t m = 0; m < cfg.n_layers; ++m) {
    LayerParams lp;
    lp.w_q = xavier({d, d}, d, d, rng);
    lp.b_q = Tensor::zeros({d}, true);
    lp.w_k = xavier({d, d}, d, d, rng);
    lp.b_k = Tensor::zeros({d}, true);
    lp.w_v = xavier({d, d}, d, d, rng);
    lp.b_v = Tensor::zeros({d}, true);
    lp.w_o = xavier({d, d}, d, d, rng);
    lp.b_o = Tensor::zeros({d}, true);
    lp.ffn_w1 = xavier({d, f}, d, f, rng);
    lp.ffn_b1 = Tensor::zeros({f}, true);
    lp.ffn_w2 = xavier({f, d}, f, d, rng);
    lp.ffn_b2 = Tensor::zeros({d}, true);
    lp.ln1_gain = Tensor::full({d}, 1.0, true);
    lp.ln1_bias = Tensor::zeros({d}, true);
    lp.ln2_gain = Tensor::full({d}, 1.0, true);
    lp.ln2_bias = Tensor::zeros({d}, true);
    p.layers.push_back(std::move(lp));
  }
  for (std::size_t h = 0; h < cfg.head_count(); ++h) {
    HeadParams hp;
    hp.w_mu = xavier({d, 1}, d, 1, rng);
    hp.b_mu = Tensor::zeros({1}, true);
    if (cfg.objective == Objective::kNll) {
      hp.w_sigma = xavier({d, 1}, d, 1, rng);
      hp.b_sigma = Tensor::zeros({1}, true);
    }
    p.heads.push_back(std::move(hp));
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("w_emb", w_emb);
  out.emplace_back("b_emb", b_emb);
  out.emplace_back("e_id", e_id);
  for (std::size_t m = 0; m < theta.size(); ++m)
    out.emplace_back(theta.size() == 1 ? "theta" : "theta." + std::to_string(m),
                     theta[m]);
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const LayerParams& lp = layers[m];
    std::string pre = "layer." + std::to_string(m) + ".";
    out.emplace_back(pre + "w_q", lp.w_q);
    out.emplace_back(pre + "b_q", lp.b_q);
    out.emplace_back(pre + "w_k", lp.w_k);
    out.emplace_back(pre + "b_k", lp.b_k);
    out.emplace_back(pre + "w_v", lp.w_v);
    out.emplace_back(pre + "b_v", lp.b_v);
    out.emplace_back(pre + "w_o", lp.w_o);
    out.emplace_back(pre + "b_o", lp.b_o);
    out.emplace_back(pre + "ffn_w1", lp.ffn_w1);
    out.emplace_back(pre + "ffn_b1", lp.ffn_b1);
    out.emplace_back(pre + "ffn_w2", lp.ffn_w2);
    out.emplace_back(pre + "ffn_b2", lp.ffn_b2);
    out.emplace_back(pre + "ln1_gain", lp.ln1_gain);
    out.emplace_back(pre + "ln1_bias", lp.ln1_bias);
    out.emplace_back(pre + "ln2_gain", lp.ln2_gain);
    out.emplace_back(pre + "ln2_bias", lp.ln2_bias);
  }
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const HeadParams& hp = heads[h];
    std::string pre =
        heads.size() == 1 ? "head." : "head." + std::to_string(h) + ".";
    out.emplace_back(pre + "w_mu", hp.w_mu);
    out.emplace_back(pre + "b_mu", hp.b_mu);
    if (hp.w_sigma.defined()) {
      out.emplace_back(pre + "w_sigma", hp.w_sigma);
      out.emplace_back(pre + "b_sigma", hp.b_sigma);
    }
  }
  return out;
}

std::size_t ModelParams::count_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t.size();
  return n;
}

Tensor embed(const Tensor& inputs, const ModelParams& p, const ModelConfig& cfg,
             bool training, Rng& rng) {
  if (inputs.rank() != 3 || inputs.shape()[1] != cfg.n_vars ||
      inputs.shape()[2] != cfg.lag)
    throw ShapeError("embed", inputs.shape(),
                     {inputs.rank() ? inputs.shape()[0] : 1, cfg.n_vars,
                      cfg.lag});
  Tensor tokens = matmul(inputs, transpose_last2(p.w_emb));
  tokens = add(tokens, p.b_emb);
  tokens = dropout(tokens, cfg.dropout_rate, training, rng);
  return add(tokens, p.e_id);
}

AdjacencyEstimate adjacency(const ModelParams& p, const ModelConfig& cfg) {
  Tensor gamma_diag = diag_matrix(cfg.n_vars, cfg.diag_force);
  AdjacencyEstimate a;
  if (p.theta.size() == 1) {
    a.scores = sigmoid(add(p.theta[0], gamma_diag));
    return a;
  }
  for (const Tensor& th : p.theta)
    a.layer_scores.push_back(sigmoid(add(th, gamma_diag)));
  Tensor acc = a.layer_scores[0];
  for (std::size_t m = 1; m < a.layer_scores.size(); ++m)
    acc = add(acc, a.layer_scores[m]);
  a.scores = mul(acc, 1.0 / static_cast<double>(a.layer_scores.size()));
  return a;
}

Tensor masked_attention(const Tensor& tokens, const Tensor& a_hat,
                        const LayerParams& lp, const ModelConfig& cfg) {
  std::size_t dk = cfg.head_dim();
  Tensor q = add(matmul(tokens, lp.w_q), lp.b_q);
  Tensor k = add(matmul(tokens, lp.w_k), lp.b_k);
  Tensor v = add(matmul(tokens, lp.w_v), lp.b_v);
  Tensor log_mask = log_gate(a_hat, cfg.mask_eps);
  std::vector<Tensor> ctx;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Tensor qh = slice_axis(q, 2, h * dk, dk);
    Tensor kh = slice_axis(k, 2, h * dk, dk);
    Tensor vh = slice_axis(v, 2, h * dk, dk);
    Tensor scores = mul(matmul(qh, transpose_last2(kh)),
                        1.0 / std::sqrt(static_cast<double>(dk)));
    scores = add(scores, log_mask);
    ctx.push_back(matmul(softmax_lastdim(scores), vh));
  }
  Tensor merged = concat_lastdim(ctx);
  return add(matmul(merged, lp.w_o), lp.b_o);
}

Tensor encoder_forward(const Tensor& tokens, const ModelParams& p,
                       const ModelConfig& cfg, const AdjacencyEstimate& a) {
  Tensor x = tokens;
  for (std::size_t m = 0; m < cfg.n_layers; ++m) {
    const LayerParams& lp = p.layers[m];
    Tensor attn = masked_attention(x, a.mask_for_layer(m), lp, cfg);
    x = layer_norm(add(x, attn), lp.ln1_gain, lp.ln1_bias);
    Tensor h = gelu(add(matmul(x, lp.ffn_w1), lp.ffn_b1));
    Tensor y = add(matmul(h, lp.ffn_w2), lp.ffn_b2);
    x = layer_norm(add(x, y), lp.ln2_gain, lp.ln2_bias);
  }
  return x;
}

namespace {

// B x N x d times d x 1 head weights, squeezed to B x N.
Tensor apply_linear_head(const Tensor& latent, const ModelConfig& cfg,
                         const std::vector<HeadParams>& heads, bool sigma) {
  std::size_t b = latent.shape()[0];
  auto one = [&](const Tensor& z, const HeadParams& hp) {
    const Tensor& w = sigma ? hp.w_sigma : hp.w_mu;
    const Tensor& bias = sigma ? hp.b_sigma : hp.b_mu;
    return add(matmul(z, w), bias);
  };
  if (heads.size() == 1)
    return reshape(one(latent, heads[0]), {b, cfg.n_vars});
  std::vector<Tensor> cols;
  for (std::size_t i = 0; i < cfg.n_vars; ++i) {
    Tensor zi = slice_axis(latent, 1, i, 1);
    cols.push_back(reshape(one(zi, heads[i]), {b, 1}));
  }
  return concat_lastdim(cols);
}

}  // namespace

Prediction predict(const Tensor& latent, const ModelParams& p,
                   const ModelConfig& cfg, const Tensor& inputs) {
  std::size_t b = latent.shape()[0];
  Prediction out;
  out.mu = apply_linear_head(latent, cfg, p.heads, false);
  if (cfg.residual_target) {
    Tensor last = reshape(slice_axis(inputs, 2, cfg.lag - 1, 1),
                          {b, cfg.n_vars});
    out.mu = add(out.mu, last);
  }
  if (cfg.objective == Objective::kNll) {
    Tensor pre = apply_linear_head(latent, cfg, p.heads, true);
    out.var = add(softplus(pre), cfg.mask_eps);
    out.has_var = true;
  }
  return out;
}

Tensor loss_joint(const Prediction& pred, const Tensor& targets,
                  const AdjacencyEstimate& a, double lambda,
                  const ModelConfig& cfg) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  Tensor diff = sub(targets, pred.mu);
  Tensor pred_term;
  if (cfg.objective == Objective::kMse) {
    pred_term = mean(square(diff));
  } else {
    Tensor per = add(mul(log(pred.var), 0.5),
                     div(square(diff), mul(pred.var, 2.0)));
    pred_term = mean(per);
  }
  require_finite(pred_term, "prediction term");
  std::size_t n = cfg.n_vars;
  if (lambda == 0.0 || n < 2) return pred_term;
  Tensor off = mul(a.scores, off_diagonal_ones(n));
  Tensor sparsity =
      mul(sum(off), lambda / static_cast<double>(n * (n - 1)));
  require_finite(sparsity, "sparsity term");
  return add(pred_term, sparsity);
}

Prediction model_forward(const Tensor& inputs, const ModelParams& p,
                         const ModelConfig& cfg, const AdjacencyEstimate& a,
                         bool training, Rng& rng) {
  Tensor tokens = embed(inputs, p, cfg, training, rng);
  Tensor latent = encoder_forward(tokens, p, cfg, a);
  return predict(latent, p, cfg, inputs);
}

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"n_vars", c.n_vars},
              {"lag", c.lag},
              {"d_model", c.d_model},
              {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"ffn_width", c.ffn_width},
              {"dropout_rate", c.dropout_rate},
              {"diag_force", c.diag_force},
              {"mask_eps", c.mask_eps},
              {"objective", objective_name(c.objective)},
              {"layerwise_masks", c.layerwise_masks},
              {"decoupled_heads", c.decoupled_heads},
              {"residual_target", c.residual_target}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_vars = j.at("n_vars").get<std::size_t>();
  c.lag = j.at("lag").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.ffn_width = j.at("ffn_width").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.diag_force = j.at("diag_force").get<double>();
  c.mask_eps = j.at("mask_eps").get<double>();
  c.objective = objective_from_name(j.at("objective").get<std::string>());
  c.layerwise_masks = j.at("layerwise_masks").get<bool>();
  c.decoupled_heads = j.at("decoupled_heads").get<bool>();
  c.residual_target = j.at("residual_target").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const ModelConfig& cfg, const ModelParams& p,
                     const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(cfg);
  json arrays = json::array();
  for (const auto& [name, t] : p.named()) {
    json a;
    a["name"] = name;
    a["shape"] = t.shape();
    a["values"] = std::vector<double>(t.data().begin(), t.data().end());
    arrays.push_back(std::move(a));
  }
  j["arrays"] = std::move(arrays);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
  if (!out.good())
    throw std::runtime_error("short write on checkpoint: " + path);
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  json j = json::parse(in);
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  ModelConfig cfg = config_from_json(j.at("config"));
  cfg.validate();
  Rng scratch(0);
  ModelParams p = ModelParams::init(cfg, scratch);
  std::map<std::string, json> file_arrays;
  for (const auto& a : j.at("arrays"))
    file_arrays[a.at("name").get<std::string>()] = a;
  for (auto& [name, t] : p.named()) {
    auto it = file_arrays.find(name);
    if (it == file_arrays.end())
      throw std::runtime_error("checkpoint missing array '" + name + "'");
    const json& a = it->second;
    Shape shape = a.at("shape").get<Shape>();
    if (shape != t.shape())
      throw std::runtime_error("checkpoint array '" + name +
                               "' has the wrong shape");
    auto values = a.at("values").get<std::vector<double>>();
    if (values.size() != t.size())
      throw std::runtime_error("checkpoint array '" + name +
                               "' has the wrong length");
    std::copy(values.begin(), values.end(), t.data().begin());
    file_arrays.erase(it);
  }
  if (!file_arrays.empty())
    throw std::runtime_error("checkpoint has unknown array '" +
                             file_arrays.begin()->first + "'");
  return {cfg, p};
}

}  // namespace granger
