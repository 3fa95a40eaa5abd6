#pragma once

#include <array>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "gelgt/model.hpp"
#include "gelgt/sampler.hpp"
#include "gelgt/synthgen.hpp"
#include "gelgt/trainer.hpp"

namespace gelgt {

struct Ablations {
  bool no_structural_sampling = false;  // uniform random Stage 1
  bool no_semantic_refinement = false;  // skip Stage 2
  bool no_gaussian_bias = false;        // vanilla attention
  bool no_gnn_branch = false;           // attention branch only

  // "full", or the enabled switches joined by '+'.
  std::string name() const;
};

// One flat JSON document drives a run. Model/training keys follow the
// hyperparameter table naming (hidden_dim, global_layers, ...); the
// synthetic generator lives under "synth" and switches under "ablations".
struct RunConfig {
  SynthConfig synth;
  std::size_t max_hop = 2;
  // Task-dependent defaults (300/200 classification, 500/300 regression).
  std::optional<std::size_t> stage1_budget;
  std::optional<std::size_t> stage2_keep;
  ModelConfig model;
  TrainConfig train;
  std::array<double, 3> split{0.7, 0.15, 0.15};
  Ablations ablations;
  std::uint64_t seed = 0;

  SamplingOptions sampling_for(TaskKind kind) const;
  // Fills the data-dependent fields (node types, task) and the seeds.
  ModelConfig model_for(const Dataset& data) const;
  TrainConfig train_config() const;
  void validate() const;
};

// Unknown keys are rejected with ConfigError so that typos do not silently
// fall back to defaults.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace gelgt
