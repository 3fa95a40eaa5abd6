#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "gelgt/model.hpp"
#include "gelgt/relstore.hpp"
#include "gelgt/sampler.hpp"
#include "gelgt/synthgen.hpp"

namespace gelgt {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t max_steps_per_epoch = 500;
  std::size_t warmup_steps = 10;
  std::uint64_t rng_seed = 0;
  std::size_t eval_batch_size = 128;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Everything training needs from one database. Models keep a reference to
// `features`, so a Dataset must stay put while models built on it live.
struct Dataset {
  DatabaseSchema schema;
  TableData tables;
  RelGraph graph;
  std::vector<TableFeatures> features;
  std::size_t target_table = 0;
  std::vector<double> targets;          // per target row
  std::vector<std::int64_t> seed_times; // per target row
  std::vector<NodeId> seed_nodes;       // per target row
  Split split;

  Dataset() = default;
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;
};

void prepare_dataset(Dataset& out, DatabaseSchema schema, TableData tables,
                     const std::array<double, 3>& fractions = {0.7, 0.15, 0.15});

struct SamplingOptions {
  SamplingConfig config;
  bool random_stage1 = false;        // uniform selection instead of BFS
  bool semantic_refinement = true;   // Stage 2 on/off
};

// Sampled subgraph for one target row; `salt` varies the random Stage 1
// between epochs. Always passes check_subgraph.
SampledSubgraph sample_row(const Dataset& data, std::size_t row, const Tensor& embeddings,
                           const SamplingOptions& options, std::uint64_t salt);

// Eval-mode scores for the given target rows.
std::vector<double> predict(const GelGTModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                            const SamplingOptions& sampling, std::size_t batch_size, std::uint64_t salt = 0);

// AUC for classification, MAE for regression.
double task_metric(TaskKind kind, const std::vector<double>& scores, const std::vector<double>& targets);
bool metric_improves(TaskKind kind, double candidate, double incumbent);

double evaluate(const GelGTModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                const SamplingOptions& sampling, std::size_t batch_size);

struct TrainOptions {
  TrainConfig train;
  SamplingOptions sampling;
  std::string variant = "full";
  // When set, metrics.jsonl and the best checkpoint are written here.
  std::filesystem::path out_dir;
  std::function<void(const nlohmann::json&)> on_epoch;
};

struct TrainResult {
  std::vector<nlohmann::json> log;
  std::size_t best_epoch = 0;  // 0 = initialization
  double best_val = 0.0;
  double test_metric = 0.0;
};

// Trains in place; on return the model holds the best-validation
// parameters. Throws NumericError on a non-finite loss.
TrainResult train(GelGTModel& model, const Dataset& data, const TrainOptions& options);

}  // namespace gelgt
