#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <vector>

#include "gelgt/attention.hpp"
#include "gelgt/batch.hpp"
#include "gelgt/encoders.hpp"
#include "gelgt/gnn.hpp"
#include "gelgt/layers.hpp"
#include "gelgt/relstore.hpp"

// Stacked dual-branch model: every layer runs a Gaussian-biased attention
// branch over the whole subgraph and a GNN branch over its relational edges,
// blends them with eta = sigmoid(eta_raw), and feeds the blend to the next
// layer. The seed row of the last layer goes through a 2-layer head.
namespace gelgt {

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t gnn_layers = 3;
  double attn_dropout = 0.3;
  double gnn_dropout = 0.1;
  std::size_t ffn_mult = 2;
  double mu_init = 0.0;
  double sigma_init = 10.0;
  double temporal_lr_scale = 1.0;
  TaskKind task = TaskKind::binary_classification;
  bool no_gaussian_bias = false;
  bool no_gnn_branch = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Reads every key except encoder.n_node_types and task, which come from data.
void from_json(const nlohmann::json& j, ModelConfig& c);

// eta * attn + (1 - eta) * gnn
Var fuse(const Var& attn, const Var& gnn, const Var& eta);

// Binary classification: mean logistic loss on logits; regression: mean
// absolute error.
Var task_loss(const Var& scores, const std::vector<double>& targets, TaskKind kind);

class GelGTModel {
 public:
  GelGTModel(const ModelConfig& config, const std::vector<TableFeatures>& features, std::uint64_t init_seed);
  GelGTModel(const GelGTModel&) = delete;
  GelGTModel& operator=(const GelGTModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Encoders& encoders() const { return *encoders_; }
  std::vector<AttentionLayer>& attention_layers() { return attention_; }
  const std::vector<AttentionLayer>& attention_layers() const { return attention_; }

  // One score per subgraph (S x 1): a logit or a regression value.
  Var forward(Tape& tape, const RelGraph& graph, const PackedBatch& batch) const;
  Var loss(const Var& scores, const std::vector<double>& targets) const;

  // Overrides the learned gate; used by ablation equivalence checks.
  void pin_eta(std::optional<double> eta) { eta_pin_ = eta; }
  double eta() const;
  std::vector<std::vector<double>> mu_per_head() const;
  std::vector<std::vector<double>> sigma_per_head() const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  std::unique_ptr<Encoders> encoders_;
  std::vector<AttentionLayer> attention_;
  std::vector<Norm> attn_norms_;
  std::vector<Norm> ffn_norms_;
  std::vector<Linear> ffn_in_;
  std::vector<Linear> ffn_out_;
  std::vector<GnnBranch> gnn_;
  Parameter* eta_raw_;
  Norm final_norm_;
  Linear head_hidden_;
  Linear head_out_;
  std::optional<double> eta_pin_;
};

}  // namespace gelgt
