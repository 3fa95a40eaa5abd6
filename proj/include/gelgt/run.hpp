#pragma once

#include <filesystem>
#include <functional>
#include <memory>

#include "gelgt/config.hpp"

// Glue shared by the command-line tool and the end-to-end tests.
namespace gelgt {

std::unique_ptr<Dataset> load_dataset(const std::filesystem::path& dir, const RunConfig& config);
// Generates config.synth in memory and prepares it.
std::unique_ptr<Dataset> synth_dataset(const RunConfig& config);

struct RunOutcome {
  std::unique_ptr<GelGTModel> model;
  TrainResult result;
};

// Builds a model from `config` (init seed = config.seed) and trains it. With
// a non-empty out_dir, metrics.jsonl, best.{json,bin}, config.json and
// result.json are written there.
RunOutcome run_training(const Dataset& data, const RunConfig& config, const std::filesystem::path& out_dir = {},
                        std::function<void(const nlohmann::json&)> on_epoch = {});

nlohmann::json result_to_json(const TrainResult& result, const RunConfig& config, TaskKind kind);

}  // namespace gelgt
