#include "gelgt/model.hpp"

#include <cmath>

#include "gelgt/errors.hpp"
#include "gelgt/ops.hpp"

namespace gelgt {

void ModelConfig::validate() const {
  encoder.validate();
  if (n_layers == 0) throw ConfigError("n_layers must be positive");
  if (n_heads == 0 || encoder.d % n_heads != 0) throw ConfigError("d must be divisible by n_heads");
  if (!(attn_dropout >= 0.0 && attn_dropout < 1.0)) throw ConfigError("attn_dropout must lie in [0,1)");
  if (!(gnn_dropout >= 0.0 && gnn_dropout < 1.0)) throw ConfigError("gnn_dropout must lie in [0,1)");
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (!(sigma_init > kSigmaMin)) throw ConfigError("sigma_init must exceed the floor");
  if (!(temporal_lr_scale > 0.0)) throw ConfigError("temporal_lr_scale must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"encoder", c.encoder},
       {"n_layers", c.n_layers},
       {"n_heads", c.n_heads},
       {"gnn_layers", c.gnn_layers},
       {"attn_dropout", c.attn_dropout},
       {"gnn_dropout", c.gnn_dropout},
       {"ffn_mult", c.ffn_mult},
       {"mu_init", c.mu_init},
       {"sigma_init", c.sigma_init},
       {"temporal_lr_scale", c.temporal_lr_scale},
       {"no_gaussian_bias", c.no_gaussian_bias},
       {"no_gnn_branch", c.no_gnn_branch}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("encoder", c.encoder);
  get("n_layers", c.n_layers);
  get("n_heads", c.n_heads);
  get("gnn_layers", c.gnn_layers);
  get("attn_dropout", c.attn_dropout);
  get("gnn_dropout", c.gnn_dropout);
  get("ffn_mult", c.ffn_mult);
  get("mu_init", c.mu_init);
  get("sigma_init", c.sigma_init);
  get("temporal_lr_scale", c.temporal_lr_scale);
  get("no_gaussian_bias", c.no_gaussian_bias);
  get("no_gnn_branch", c.no_gnn_branch);
}

Var fuse(const Var& attn, const Var& gnn, const Var& eta) {
  if (!attn.value().same_shape(gnn.value())) throw ShapeError("fuse: branch shapes differ");
  return add(mul_scalar(attn, eta), mul_scalar(gnn, add_const(neg(eta), 1.0)));
}

Var task_loss(const Var& scores, const std::vector<double>& targets, TaskKind kind) {
  switch (kind) {
    case TaskKind::binary_classification:
      return bce_with_logits(scores, targets);
    case TaskKind::regression:
      return abs_error(scores, targets);
  }
  throw ConfigError("invalid task kind");
}

GelGTModel::GelGTModel(const ModelConfig& config, const std::vector<TableFeatures>& features,
                       std::uint64_t init_seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  const std::size_t d = config_.encoder.d;
  encoders_ = std::make_unique<Encoders>(config_.encoder, features, params_, rng);

  AttentionConfig ac{d, config_.n_heads, config_.mu_init, config_.sigma_init, config_.temporal_lr_scale};
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string name = "layer" + std::to_string(l);
    attn_norms_.push_back(make_norm(params_, name + ".attn_norm", d));
    attention_.emplace_back(name + ".attn", ac, params_, rng);
    ffn_norms_.push_back(make_norm(params_, name + ".ffn_norm", d));
    ffn_in_.push_back(make_linear(params_, name + ".ffn1", d, config_.ffn_mult * d, rng));
    ffn_out_.push_back(make_linear(params_, name + ".ffn2", config_.ffn_mult * d, d, rng));
    gnn_.emplace_back(name + ".gnn", d, config_.gnn_layers, config_.gnn_dropout, params_, rng);
  }
  eta_raw_ = &params_.add("eta_raw", Tensor::scalar(0.0));
  eta_raw_->weight_decay = false;
  final_norm_ = make_norm(params_, "head.norm", d);
  head_hidden_ = make_linear(params_, "head.fc1", d, d, rng);
  head_out_ = make_linear(params_, "head.fc2", d, 1, rng);
}

Var GelGTModel::forward(Tape& tape, const RelGraph& graph, const PackedBatch& batch) const {
  if (batch.subgraph_count() == 0) throw ShapeError("forward: empty batch");
  const BiasMode mode = config_.no_gaussian_bias ? BiasMode::none : BiasMode::gaussian;
  Var eta;
  if (config_.no_gnn_branch) {
    eta = tape.constant(Tensor::scalar(1.0));
  } else if (eta_pin_) {
    eta = tape.constant(Tensor::scalar(*eta_pin_));
  } else {
    eta = sigmoid(tape.param(*eta_raw_));
  }

  Var h = encoders_->encode(tape, graph, batch);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    Var a = attention_[l].attend_batch(tape, attn_norms_[l].apply(tape, h), batch, mode);
    a = add(h, dropout(a, config_.attn_dropout));
    Var f = ffn_out_[l].apply(tape, gelu(ffn_in_[l].apply(tape, ffn_norms_[l].apply(tape, a))));
    Var h_attn = add(a, dropout(f, config_.attn_dropout));
    if (config_.no_gnn_branch) {
      h = h_attn;
      continue;
    }
    Var h_gnn = gnn_[l].forward(tape, h, batch.mean_adjacency);
    h = fuse(h_attn, h_gnn, eta);
  }
  Var seeds = gather_rows(h, batch.seed_rows());
  return head_out_.apply(tape, gelu(head_hidden_.apply(tape, final_norm_.apply(tape, seeds))));
}

Var GelGTModel::loss(const Var& scores, const std::vector<double>& targets) const {
  return task_loss(scores, targets, config_.task);
}

double GelGTModel::eta() const {
  if (config_.no_gnn_branch) return 1.0;
  if (eta_pin_) return *eta_pin_;
  const double z = eta_raw_->value[0];
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<std::vector<double>> GelGTModel::mu_per_head() const {
  std::vector<std::vector<double>> out;
  for (const auto& a : attention_) out.push_back(a.mu());
  return out;
}

std::vector<std::vector<double>> GelGTModel::sigma_per_head() const {
  std::vector<std::vector<double>> out;
  for (const auto& a : attention_) out.push_back(a.sigma());
  return out;
}

}  // namespace gelgt
