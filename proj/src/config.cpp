#include "gelgt/config.hpp"

#include <fstream>
#include <set>

#include "gelgt/errors.hpp"

namespace gelgt {

std::string Ablations::name() const {
  std::string out;
  auto add = [&out](bool on, const char* label) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += label;
  };
  add(no_structural_sampling, "no_structural_sampling");
  add(no_semantic_refinement, "no_semantic_refinement");
  add(no_gaussian_bias, "no_gaussian_bias");
  add(no_gnn_branch, "no_gnn_branch");
  return out.empty() ? "full" : out;
}

SamplingOptions RunConfig::sampling_for(TaskKind kind) const {
  SamplingOptions o;
  o.config = SamplingConfig::for_task(kind);
  o.config.max_hop = max_hop;
  if (stage1_budget) o.config.stage1_budget = *stage1_budget;
  if (stage2_keep) o.config.stage2_keep = *stage2_keep;
  o.random_stage1 = ablations.no_structural_sampling;
  o.semantic_refinement = !ablations.no_semantic_refinement;
  o.config.validate();
  return o;
}

ModelConfig RunConfig::model_for(const Dataset& data) const {
  ModelConfig m = model;
  m.encoder.n_node_types = data.graph.type_count();
  m.encoder.max_hop = max_hop;
  m.encoder.pe_seed = seed;
  m.task = data.schema.task.kind;
  m.no_gaussian_bias = ablations.no_gaussian_bias;
  m.no_gnn_branch = ablations.no_gnn_branch;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.rng_seed = seed;
  return t;
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  if (max_hop < 1) throw ConfigError("max_hop must be >= 1");
  if (stage1_budget && stage2_keep && *stage2_keep > *stage1_budget) {
    throw ConfigError("stage2_keep must not exceed stage1_budget");
  }
  double total = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  ModelConfig m = model;
  m.encoder.n_node_types = 1;
  m.validate();
}

namespace {

const std::set<std::string> kKeys = {
    "synth",         "hidden_dim",    "global_layers",      "local_gnn_depth", "attention_heads",
    "ffn_ratio",     "pe_dim",        "gin_layers",         "learning_rate",   "weight_decay",
    "batch_size",    "dropout",       "gnn_dropout",        "max_steps_per_epoch", "epochs",
    "warmup_steps",  "max_hop",       "stage1_budget",      "stage2_keep",     "mu_init_days",
    "sigma_init_days", "temporal_lr_scale", "seed",         "eval_batch_size", "split",
    "ablations"};

const std::set<std::string> kAblationKeys = {"no_structural_sampling", "no_semantic_refinement", "no_gaussian_bias",
                                             "no_gnn_branch"};

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    auto get = [&doc](const char* key, auto& field) {
      if (doc.contains(key)) doc.at(key).get_to(field);
    };
    if (doc.contains("synth")) c.synth = doc.at("synth").get<SynthConfig>();
    get("hidden_dim", c.model.encoder.d);
    get("global_layers", c.model.n_layers);
    get("local_gnn_depth", c.model.gnn_layers);
    get("attention_heads", c.model.n_heads);
    get("ffn_ratio", c.model.ffn_mult);
    get("pe_dim", c.model.encoder.pe_dim);
    get("gin_layers", c.model.encoder.gin_layers);
    get("learning_rate", c.train.lr);
    get("weight_decay", c.train.weight_decay);
    get("batch_size", c.train.batch_size);
    get("dropout", c.model.attn_dropout);
    get("gnn_dropout", c.model.gnn_dropout);
    get("max_steps_per_epoch", c.train.max_steps_per_epoch);
    get("epochs", c.train.epochs);
    get("warmup_steps", c.train.warmup_steps);
    get("max_hop", c.max_hop);
    if (doc.contains("stage1_budget")) c.stage1_budget = doc.at("stage1_budget").get<std::size_t>();
    if (doc.contains("stage2_keep")) c.stage2_keep = doc.at("stage2_keep").get<std::size_t>();
    get("mu_init_days", c.model.mu_init);
    get("sigma_init_days", c.model.sigma_init);
    get("temporal_lr_scale", c.model.temporal_lr_scale);
    get("seed", c.seed);
    get("eval_batch_size", c.train.eval_batch_size);
    get("split", c.split);
    if (doc.contains("ablations")) {
      const auto& a = doc.at("ablations");
      if (!a.is_object()) throw ConfigError("'ablations' must be an object");
      for (const auto& [key, value] : a.items()) {
        if (!kAblationKeys.contains(key)) throw ConfigError("unknown ablation '" + key + "'");
      }
      auto flag = [&a](const char* key, bool& field) {
        if (a.contains(key)) a.at(key).get_to(field);
      };
      flag("no_structural_sampling", c.ablations.no_structural_sampling);
      flag("no_semantic_refinement", c.ablations.no_semantic_refinement);
      flag("no_gaussian_bias", c.ablations.no_gaussian_bias);
      flag("no_gnn_branch", c.ablations.no_gnn_branch);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j = {{"synth", c.synth},
                      {"hidden_dim", c.model.encoder.d},
                      {"global_layers", c.model.n_layers},
                      {"local_gnn_depth", c.model.gnn_layers},
                      {"attention_heads", c.model.n_heads},
                      {"ffn_ratio", c.model.ffn_mult},
                      {"pe_dim", c.model.encoder.pe_dim},
                      {"gin_layers", c.model.encoder.gin_layers},
                      {"learning_rate", c.train.lr},
                      {"weight_decay", c.train.weight_decay},
                      {"batch_size", c.train.batch_size},
                      {"dropout", c.model.attn_dropout},
                      {"gnn_dropout", c.model.gnn_dropout},
                      {"max_steps_per_epoch", c.train.max_steps_per_epoch},
                      {"epochs", c.train.epochs},
                      {"warmup_steps", c.train.warmup_steps},
                      {"max_hop", c.max_hop},
                      {"mu_init_days", c.model.mu_init},
                      {"sigma_init_days", c.model.sigma_init},
                      {"temporal_lr_scale", c.model.temporal_lr_scale},
                      {"seed", c.seed},
                      {"eval_batch_size", c.train.eval_batch_size},
                      {"split", c.split},
                      {"ablations",
                       {{"no_structural_sampling", c.ablations.no_structural_sampling},
                        {"no_semantic_refinement", c.ablations.no_semantic_refinement},
                        {"no_gaussian_bias", c.ablations.no_gaussian_bias},
                        {"no_gnn_branch", c.ablations.no_gnn_branch}}}};
  if (c.stage1_budget) j["stage1_budget"] = *c.stage1_budget;
  if (c.stage2_keep) j["stage2_keep"] = *c.stage2_keep;
  return j;
}

}  // namespace gelgt
